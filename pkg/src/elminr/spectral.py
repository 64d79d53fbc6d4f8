"""Frequency-weighted spectral energy of signal patches.

The energy of a patch is ``sum_k ||k||_1 * |F(k)|`` where ``F`` is the
unitary DFT of the mean-removed patch and ``k`` runs over centered integer
frequency indices. It is a discrete stand-in for the spectral Barron norm and
is only ever used for relative comparisons.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=256)
def _l1_weights(shape: tuple[int, ...]) -> np.ndarray:
    # fftfreq(n) * n gives the centered index range [-floor(n/2), ceil(n/2) - 1]
    grids = np.meshgrid(
        *[np.abs(np.rint(np.fft.fftfreq(n) * n)) for n in shape], indexing="ij", sparse=True
    )
    weights = sum(grids)
    weights = np.broadcast_to(weights, shape).astype(np.float64)
    weights.setflags(write=False)
    return weights


def frequency_indices(n: int) -> np.ndarray:
    """Centered integer frequency index for each FFT bin of an axis of length ``n``."""
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def barron_energy(patch, mask=None, channel_axis: int | None = -1) -> float:
    """Spectral energy of a (possibly masked) patch.

    Parameters
    ----------
    patch : array_like
        Rectangular slice, the bounding box of a region. With
        ``channel_axis`` set (the default, last axis) energies are summed
        over channels; pass ``channel_axis=None`` for a single-channel patch
        without a channel axis.
    mask : array_like of bool, optional
        Grid-shaped membership mask. Samples outside the mask are replaced
        by the masked per-channel mean, i.e. zero after mean removal.

    Returns
    -------
    float
        Nonnegative energy; zero exactly when the (masked) patch is constant
        per channel.
    """
    x = np.asarray(patch, dtype=np.float64)
    if channel_axis is None:
        x = x[..., None]
    else:
        x = np.moveaxis(x, channel_axis, -1)
    grid = x.shape[:-1]
    if x.size == 0 or len(grid) == 0:
        raise ValueError("empty patch")

    if mask is None:
        centered = x - x.mean(axis=tuple(range(len(grid))), keepdims=True)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid:
            raise ValueError(f"mask shape {mask.shape} does not match patch grid {grid}")
        if not mask.any():
            raise ValueError("empty patch: mask selects no samples")
        mean = x[mask].mean(axis=0)
        centered = np.where(mask[..., None], x - mean, 0.0)

    axes = tuple(range(len(grid)))
    # mean removal leaves ulp-level residue on constant data; force exact zero
    sel = x if mask is None else x[mask]
    flat = sel.reshape(-1, x.shape[-1])
    constant = flat.min(axis=0) == flat.max(axis=0)
    if constant.all():
        return 0.0
    if constant.any():
        centered = centered * ~constant
    spectrum = np.fft.fftn(centered, axes=axes, norm="ortho")
    magnitude = np.abs(spectrum)
    weights = _l1_weights(grid)
    return float(np.sum(magnitude * weights[..., None]))
