"""Coordinate normalization, random Fourier features and frozen hidden layers.

All randomness lives here. Every random draw is seeded from one global seed
through :func:`derive_seed`, a SplitMix64 mix, so a fit is reproducible from
``(global_seed, rng_algorithm)`` alone. ``rng_algorithm`` names the numpy bit
generator ("pcg64" or "philox").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

RNG_ALGORITHMS = {"pcg64": np.random.PCG64, "philox": np.random.Philox}

# stream tags keep the encoder and the per-region layers on disjoint seeds
STREAM_RFF = 1
STREAM_HIDDEN = 2


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(global_seed: int, *keys: int) -> int:
    """Fold integer keys into ``global_seed`` with SplitMix64."""
    h = splitmix64(int(global_seed) & _MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & _MASK64))
    return h


def make_rng(seed: int, rng_algorithm: str = "pcg64") -> np.random.Generator:
    try:
        bitgen = RNG_ALGORITHMS[rng_algorithm]
    except KeyError:
        raise ValueError(f"unknown rng_algorithm {rng_algorithm!r}; choose from {sorted(RNG_ALGORITHMS)}")
    return np.random.Generator(bitgen(seed))


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CoordMap:
    """Per-axis affine map taking a sample bounding box onto [-1, 1]."""

    lo: tuple
    hi: tuple

    @classmethod
    def from_bbox(cls, bbox) -> "CoordMap":
        return cls(tuple(float(a) for a, _ in bbox), tuple(float(b) for _, b in bbox))

    @property
    def scale(self) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        span = hi - lo
        return np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 0.0)

    @property
    def offset(self) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        span = hi - lo
        return np.where(span > 0, -(hi + lo) / np.where(span > 0, span, 1.0), 0.0)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        # written as 2 (x - lo) / span - 1 so the bbox corners land on +-1 exactly
        out = 2.0 * (points - lo) / safe - 1.0
        return np.where(span > 0, out, 0.0)


def normalize_coords(region, indices) -> np.ndarray:
    """Map sample indices inside ``region.bbox`` to [-1, 1]^d."""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.float64))
    cmap = CoordMap.from_bbox(region.bbox)
    lo, hi = np.asarray(cmap.lo), np.asarray(cmap.hi)
    if np.any(indices < lo) or np.any(indices > hi):
        raise ValueError("indices fall outside the region bounding box")
    return cmap(indices)


@dataclass(frozen=True, eq=False)
class RffEncoder:
    """Gaussian random Fourier features ``[cos(2 pi B^T x), sin(2 pi B^T x)]``."""

    B: np.ndarray
    sigma: float = 1.0
    seed: int | None = None

    @classmethod
    def create(cls, n_dims: int, n_frequencies: int = 10, sigma: float = 1.0, seed: int = 0,
               rng_algorithm: str = "pcg64") -> "RffEncoder":
        if n_frequencies < 1:
            raise ValueError("need at least one frequency")
        rng = make_rng(derive_seed(seed, STREAM_RFF), rng_algorithm)
        B = rng.normal(0.0, sigma, size=(n_dims, n_frequencies))
        return cls(_frozen(B), float(sigma), seed)

    @property
    def n_frequencies(self) -> int:
        return self.B.shape[1]

    @property
    def output_dim(self) -> int:
        return 2 * self.B.shape[1]

    def __call__(self, x) -> np.ndarray:
        return rff_encode(self, x)


def rff_encode(enc: RffEncoder, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("coordinates must be finite")
    proj = 2.0 * np.pi * (x @ enc.B)
    return np.concatenate([np.cos(proj), np.sin(proj)], axis=-1)


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    """Frozen ReLU layer: ``W`` is (m, input_dim), ``b`` is (m,)."""

    W: np.ndarray
    b: np.ndarray
    seed: int | None = None

    @classmethod
    def create(cls, input_dim: int, m: int, global_seed: int = 0, region_id: int = 0,
               rng_algorithm: str = "pcg64") -> "HiddenLayer":
        """Draw ``W ~ N(0, 1)`` and ``b ~ U(-1, 1)`` from the region's own seed."""
        if m < 1:
            raise ValueError("m must be >= 1")
        seed = derive_seed(global_seed, STREAM_HIDDEN, region_id)
        rng = make_rng(seed, rng_algorithm)
        W = rng.standard_normal((m, input_dim))
        b = rng.uniform(-1.0, 1.0, size=m)
        return cls(_frozen(W), _frozen(b), seed)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]


def hidden_activations(layer: HiddenLayer, enc: RffEncoder | None, coords,
                       bias_column: bool = False) -> np.ndarray:
    """Activation matrix ``H[k, j] = relu(w_j . g(x_k) + b_j)``.

    ``g`` is the RFF encoder when given, the identity otherwise. With
    ``bias_column`` a trailing column of ones is appended.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    inputs = coords if enc is None else rff_encode(enc, coords)
    if inputs.shape[1] != layer.input_dim:
        raise ValueError(f"layer expects {layer.input_dim} inputs, got {inputs.shape[1]}")
    H = inputs @ layer.W.T
    H += layer.b
    np.maximum(H, 0.0, out=H)
    if bias_column:
        H = np.hstack([H, np.ones((H.shape[0], 1))])
    return H
