"""Reconstruction metrics on max-normalized signals."""

from __future__ import annotations

import numpy as np

EPS = 1e-8


def _normalized(pred, gt):
    pred = np.asarray(getattr(pred, "values", pred), dtype=np.float64)
    gt = np.asarray(getattr(gt, "values", gt), dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    peak = gt.max() if gt.size else 0.0
    if not peak > 0:
        raise ValueError("ground truth maximum must be positive")
    return pred / peak, gt / peak


def mse(pred, gt) -> float:
    p, g = _normalized(pred, gt)
    return float(np.mean((p - g) ** 2))


def mae(pred, gt) -> float:
    p, g = _normalized(pred, gt)
    return float(np.mean(np.abs(p - g)))


def channel_psnr(pred, gt, channel_axis: int | None = None) -> np.ndarray:
    """Per-channel PSNR. See :func:`psnr` for the channel convention."""
    if channel_axis is None and hasattr(gt, "channels"):
        channel_axis = -1
    p, g = _normalized(pred, gt)
    if channel_axis is None:
        p, g = p.reshape(-1, 1), g.reshape(-1, 1)
    else:
        n_ch = p.shape[channel_axis]
        p = np.moveaxis(p, channel_axis, -1).reshape(-1, n_ch)
        g = np.moveaxis(g, channel_axis, -1).reshape(-1, n_ch)
    per_channel = np.mean((p - g) ** 2, axis=0)
    return -10.0 * np.log10(per_channel + EPS)


def psnr(pred, gt, channel_axis: int | None = None) -> float:
    """PSNR ``-10 log10(MSE + 1e-8)`` per channel, averaged over channels.

    Both inputs are divided by the ground-truth maximum first.
    :class:`~elminr.tensor_io.SignalTensor` inputs use their channel axis;
    plain arrays count as one channel unless ``channel_axis`` is given.
    """
    return float(np.mean(channel_psnr(pred, gt, channel_axis)))
