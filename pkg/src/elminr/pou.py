"""Partition-of-unity blending over (possibly irregular) regions.

Every region gets a raw window that is 1 at depth >= ``overlap`` inside the
region and decays with a raised-cosine profile to 0 at depth ``overlap``
outside it. Depth is measured in samples from the region boundary, which
sits half a sample outside the region's outermost samples. Sides lying on
the domain boundary are not tapered. The blending weights are the raw
windows divided by their pointwise sum, so they sum to one for any region
geometry.

Rectangular regions use a product of per-axis tapers; other shapes use the
Euclidean distance to the neighboring regions' cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import Partition, Region


def raised_cosine(depth, overlap: float) -> np.ndarray:
    """Taper of signed depth: 0 at ``-overlap``, 1/2 at 0, 1 at ``+overlap``."""
    depth = np.asarray(depth, dtype=np.float64)
    if overlap == 0:
        return (depth >= 0).astype(np.float64)
    # sine form of 1/2 - 1/2 cos(pi t): exact 1/2 at zero depth
    u = np.clip(depth / overlap, -1.0, 1.0)
    return 0.5 + 0.5 * np.sin(0.5 * np.pi * u)


def grid_axes(signal_shape, query_shape=None) -> list:
    """Sample-space coordinates of a query grid covering the same domain.

    Query sample ``j`` of ``Q`` along an axis of ``n`` samples sits at
    ``(j + 0.5) * n / Q - 0.5``, so ``Q == n`` gives the integer grid.
    """
    if query_shape is None:
        query_shape = signal_shape
    if len(query_shape) != len(signal_shape):
        raise ValueError("query grid must have the same number of axes as the signal")
    axes = []
    for n, q in zip(signal_shape, query_shape):
        if q == n:
            axes.append(np.arange(n, dtype=np.float64))
        else:
            axes.append((np.arange(q) + 0.5) * (n / q) - 0.5)
    return axes


@dataclass
class _Patch:
    region_index: int
    index: tuple  # per-axis integer index arrays into the query grid
    weight: np.ndarray  # raw window on the sub-grid, zeros where unsupported


def _box_distance(points, lo, hi) -> np.ndarray:
    """Euclidean distance from each point to the nearest of the boxes ``[lo, hi]``."""
    if len(lo) == 0:
        return np.full(points.shape[0], np.inf)
    gap = np.maximum(np.maximum(lo[None] - points[:, None], points[:, None] - hi[None]), 0.0)
    return np.sqrt((gap * gap).sum(-1)).min(axis=1)


@dataclass
class PouField:
    partition: Partition
    overlap: float = 0.0
    window: str = "raised_cosine"
    _rect: list = field(default_factory=list, repr=False)
    _boxes: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        p = self.partition
        self._rect = [p.is_rectangular(r) for r in p.regions]
        edges = p.edges
        # continuous extent of every atomic cell: [first - 0.5, last + 0.5]
        lo = np.array(np.meshgrid(*[e[:-1] - 0.5 for e in edges], indexing="ij")).reshape(len(edges), -1).T
        hi = np.array(np.meshgrid(*[e[1:] - 0.5 for e in edges], indexing="ij")).reshape(len(edges), -1).T
        self._cell_lo, self._cell_hi = lo, hi
        self._labels = p.cell_labels().reshape(-1)
        self._domain = np.array([[-0.5, n - 0.5] for n in p.signal_shape])

    @property
    def regions(self) -> list:
        return self.partition.regions

    def support_interval(self, region: Region) -> np.ndarray:
        """Per-axis continuous interval outside of which the raw window vanishes."""
        box = np.array([[lo - 0.5 - self.overlap, hi + 0.5 + self.overlap] for lo, hi in region.bbox])
        box[:, 0] = np.maximum(box[:, 0], self._domain[:, 0])
        box[:, 1] = np.minimum(box[:, 1], self._domain[:, 1])
        return box

    def raw_window(self, k: int, points) -> np.ndarray:
        """Unnormalized window of region ``k`` at continuous sample positions."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        region = self.regions[k]
        if self._rect[k]:
            return self._rect_window(region, [points[:, a] for a in range(points.shape[1])], outer=False)
        return raised_cosine(self._irregular_depth(k, points), self.overlap)

    def _rect_window(self, region, axis_coords, outer=True):
        # per-axis taper; outer=True returns the outer product over a grid
        factors = []
        for a, ((lo, hi), x) in enumerate(zip(region.bbox, axis_coords)):
            n = self.partition.signal_shape[a]
            d_lo = x - (lo - 0.5) if lo > 0 else np.full_like(x, np.inf)
            d_hi = (hi + 0.5) - x if hi < n - 1 else np.full_like(x, np.inf)
            factors.append(raised_cosine(np.minimum(d_lo, d_hi), self.overlap))
        if not outer:
            return np.prod(factors, axis=0)
        w = factors[0]
        for f in factors[1:]:
            w = np.multiply.outer(w, f)
        return w

    def _irregular_depth(self, k, points):
        region = self.regions[k]
        rid = region.id
        if rid not in self._boxes:
            own = self._labels == rid
            sup = self.support_interval(region)
            # only cells reachable within the overlap band can affect the depth
            reach = sup.copy()
            reach[:, 0] -= self.overlap + 0.5
            reach[:, 1] += self.overlap + 0.5
            near = np.all((self._cell_hi >= reach[:, 0]) & (self._cell_lo <= reach[:, 1]), axis=1)
            other = near & ~own
            self._boxes[rid] = (
                self._cell_lo[own], self._cell_hi[own], self._cell_lo[other], self._cell_hi[other]
            )
        in_lo, in_hi, out_lo, out_hi = self._boxes[rid]
        d_in = _box_distance(points, in_lo, in_hi)
        d_out = _box_distance(points, out_lo, out_hi)
        return np.where(d_in > 0, -d_in, d_out)

    def _patch(self, k, axes):
        region = self.regions[k]
        sup = self.support_interval(region)
        idx = []
        for a, x in enumerate(axes):
            if self.overlap == 0:
                sel = (x >= sup[a, 0]) & (x <= sup[a, 1])
            else:
                sel = (x > sup[a, 0]) & (x < sup[a, 1])
            idx.append(np.nonzero(sel)[0])
        if any(len(i) == 0 for i in idx):
            return None
        sub = [axes[a][i] for a, i in enumerate(idx)]
        if self._rect[k]:
            w = self._rect_window(region, sub)
        else:
            pts = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1).reshape(-1, len(sub))
            w = raised_cosine(self._irregular_depth(k, pts), self.overlap)
            w = w.reshape(tuple(len(i) for i in idx))
        return _Patch(k, tuple(idx), w)

    def patches(self, axes) -> list:
        """Raw windows of every region on its supported part of a query grid."""
        out = []
        for k in range(len(self.regions)):
            pt = self._patch(k, axes)
            if pt is not None:
                out.append(pt)
        return out

    def weight_sum(self, axes, patches=None) -> np.ndarray:
        if patches is None:
            patches = self.patches(axes)
        total = np.zeros(tuple(len(x) for x in axes))
        for pt in patches:
            total[np.ix_(*pt.index)] += pt.weight
        if not np.all(total > 0):
            raise AssertionError("a query sample is covered by no window")
        return total

    def weights(self, query_shape=None) -> np.ndarray:
        """Dense ``(N, *grid)`` array of normalized weights. Small grids only."""
        axes = grid_axes(self.partition.signal_shape, query_shape)
        patches = self.patches(axes)
        total = self.weight_sum(axes, patches)
        phi = np.zeros((len(self.regions),) + total.shape)
        for pt in patches:
            ix = np.ix_(*pt.index)
            phi[(pt.region_index,) + ix] = pt.weight / total[ix]
        return phi

    def support_samples(self, k: int) -> tuple:
        """Training-grid samples in region ``k``'s dilated support.

        Returns per-axis index arrays of the support's bounding sub-grid and
        a boolean mask of the samples with a positive raw window.
        """
        pt = self._patch(k, grid_axes(self.partition.signal_shape))
        return pt.index, pt.weight > 0


def build_pou(p: Partition, overlap: float = 0.0, window: str = "raised_cosine") -> PouField:
    """Shepard-normalized raised-cosine partition of unity over ``p``."""
    if window != "raised_cosine":
        raise ValueError(f"unsupported window {window!r}")
    if overlap < 0:
        raise ValueError("overlap must be >= 0")
    smallest = min(min(hi - lo + 1 for lo, hi in r.bbox) for r in p.regions)
    if p.kind != "regular":
        smallest = min(smallest, min(np.diff(e).min() for e in p.edges))
    if overlap > 0 and overlap >= smallest:
        raise ValueError(f"overlap {overlap} must be smaller than the smallest region extent {smallest}")
    return PouField(p, float(overlap), window)


def _evaluate(fn, points):
    if hasattr(fn, "predict"):
        return np.asarray(fn.predict(points), dtype=np.float64)
    return np.asarray(fn(points), dtype=np.float64)


def blend(pou: PouField, local_fields, query_shape=None) -> np.ndarray:
    """Blend per-region predictors into one field on a query grid.

    ``local_fields[k]`` is region ``k``'s predictor: an object with a
    ``predict(points)`` method or a callable, taking ``(P, d)`` continuous
    sample positions and returning ``(P, C)`` values. Returns an array of
    shape ``(*query_shape, C)``.
    """
    axes = grid_axes(pou.partition.signal_shape, query_shape)
    patches = pou.patches(axes)
    total = pou.weight_sum(axes, patches)
    out = None
    for pt in patches:
        live = pt.weight > 0
        sub = [axes[a][i] for a, i in enumerate(pt.index)]
        pts = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1)[live]
        vals = _evaluate(local_fields[pt.region_index], pts)
        if vals.ndim == 1:
            vals = vals[:, None]
        if out is None:
            out = np.zeros(total.shape + (vals.shape[1],))
        ix = np.ix_(*pt.index)
        block = np.zeros(pt.weight.shape + (vals.shape[1],))
        block[live] = vals * (pt.weight[live] / total[ix][live])[:, None]
        out[ix] += block
    return out
