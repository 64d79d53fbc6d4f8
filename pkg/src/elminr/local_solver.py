"""Closed-form output-weight solves for the local ELMs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .features import CoordMap, HiddenLayer, RffEncoder, hidden_activations

SOLVER_MODES = ("auto", "normal", "orthogonal", "svd")
RELATIVE_RIDGE = 1e-10
_ESCALATIONS = 3


class SolverError(RuntimeError):
    """The least-squares system could not be factorized."""


def default_ridge(H) -> float:
    """Relative Tikhonov floor ``1e-10 * trace(H^T H) / m``."""
    H = np.asarray(H)
    return RELATIVE_RIDGE * float(np.einsum("ij,ij->", H, H)) / H.shape[1]


def _svd_solve(H, Y, ridge):
    U, s, Vt = la.svd(H, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    if ridge > 0:
        filt = s / (s * s + ridge)
    else:
        # minimum-norm pseudoinverse with the usual rank cutoff
        cutoff = np.finfo(float).eps * max(H.shape) * (s[0] if s.size else 0.0)
        filt = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return Vt.T @ (filt[:, None] * (U.T @ Y))


def _normal_solve(H, Y, ridge):
    A = H.T @ H
    A[np.diag_indices_from(A)] += ridge
    c = la.cho_factor(A, lower=False, check_finite=False)
    return la.cho_solve(c, H.T @ Y, check_finite=False)


def _orthogonal_solve(H, Y, ridge):
    S, m = H.shape
    if ridge > 0:
        H = np.vstack([H, np.sqrt(ridge) * np.eye(m)])
        Y = np.vstack([Y, np.zeros((m, Y.shape[1]))])
    elif S < m:
        raise np.linalg.LinAlgError("underdetermined system without ridge")
    Q, R = la.qr(H, mode="economic", check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.min() <= np.finfo(float).eps * max(H.shape) * diag.max():
        raise np.linalg.LinAlgError("rank-deficient R factor")
    return la.solve_triangular(R, Q.T @ Y, check_finite=False)


def solve_local(H, Y, ridge: float | None = None, mode: str = "auto") -> np.ndarray:
    """Minimize ``||H a - Y||_F^2 + ridge ||a||_F^2`` for all channels at once.

    ``ridge=None`` uses :func:`default_ridge`. In ``auto`` mode a Cholesky
    solve of the normal equations is tried first; on failure, or when
    ``ridge == 0``, a minimum-norm SVD solve is used instead. ``normal``
    escalates the ridge by 100x up to three times before giving up.
    """
    if mode not in SOLVER_MODES:
        raise ValueError(f"unknown solver mode {mode!r}")
    H = np.asarray(H, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    vector = Y.ndim == 1
    if vector:
        Y = Y[:, None]
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"H must be a non-empty matrix, got shape {H.shape}")
    if Y.shape[0] != H.shape[0]:
        raise ValueError(f"H has {H.shape[0]} rows but Y has {Y.shape[0]}")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite entries in H or Y")
    if ridge is None:
        ridge = default_ridge(H)
    if ridge < 0:
        raise ValueError("ridge must be >= 0")

    if mode == "svd" or (mode == "auto" and ridge == 0):
        alpha = _svd_solve(H, Y, ridge)
    elif mode == "orthogonal":
        try:
            alpha = _orthogonal_solve(H, Y, ridge)
        except np.linalg.LinAlgError:
            alpha = _svd_solve(H, Y, ridge)
    elif mode == "auto":
        try:
            alpha = _normal_solve(H, Y, ridge)
        except np.linalg.LinAlgError:
            alpha = _svd_solve(H, Y, ridge)
    else:
        lam = ridge
        for _ in range(_ESCALATIONS + 1):
            try:
                alpha = _normal_solve(H, Y, lam)
                break
            except np.linalg.LinAlgError:
                lam = 100.0 * max(lam, default_ridge(H))
        else:
            raise SolverError("normal-equation factorization failed after ridge escalation")
    if not np.all(np.isfinite(alpha)):
        raise SolverError("solve produced non-finite weights")
    return alpha[:, 0] if vector else alpha


@dataclass(frozen=True, eq=False)
class LocalModel:
    """One region's frozen features plus solved output weights."""

    region_id: int
    hidden: HiddenLayer
    encoder: RffEncoder | None
    coord_map: CoordMap
    alpha: np.ndarray
    fit_residual_rms: np.ndarray
    ridge_used: float
    bias_column: bool = True

    def activations(self, normalized_coords) -> np.ndarray:
        return hidden_activations(self.hidden, self.encoder, normalized_coords, self.bias_column)

    def predict(self, points) -> np.ndarray:
        """Evaluate at sample-grid positions (continuous, unnormalized)."""
        return predict_local(self, self.coord_map(points))


def predict_local(model: LocalModel, coords) -> np.ndarray:
    """``H(coords) @ alpha`` for coordinates already normalized by the model's map."""
    return model.activations(coords) @ model.alpha


def fit_local_model(region_id, hidden, encoder, coord_map, points, targets, ridge=None,
                    mode="auto", bias_column=True) -> LocalModel:
    """Build the activation matrix on ``points`` and solve for the output weights."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    H = hidden_activations(hidden, encoder, coord_map(points), bias_column)
    lam = default_ridge(H) if ridge is None else float(ridge)
    alpha = solve_local(H, targets, lam, mode)
    resid = H @ alpha - targets
    rms = np.sqrt(np.mean(resid * resid, axis=0))
    return LocalModel(region_id, hidden, encoder, coord_map, alpha, rms, lam, bias_column)
