"""scikit-learn style wrappers around the fitting pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import metrics
from .pipeline import FitConfig, build_partition, error_complexity_correlation, fit, reconstruct
from .tensor_io import SignalTensor


def check_signal(X, has_time: bool = False) -> SignalTensor:
    """Validate a signal given as a SignalTensor or array.

    2-D arrays are single-channel images; higher-rank arrays are
    channels-last.
    """
    if isinstance(X, SignalTensor):
        return X
    arr = check_array(X, dtype=np.float64, ensure_2d=False, allow_nd=True, ensure_min_samples=2,
                      input_name="X")
    if arr.ndim < 2:
        raise ValueError(f"expected a gridded signal with >= 2 axes, got shape {arr.shape}")
    return SignalTensor.from_array(arr, has_time=has_time)


class ElmInr(BaseEstimator):
    """Backpropagation-free implicit neural representation.

    ``fit(X)`` learns a representation of the gridded signal ``X``;
    ``predict(query_shape)`` samples it on any grid covering the same
    domain. Parameters mirror :class:`~elminr.pipeline.FitConfig`.

    Examples
    --------
    >>> import numpy as np
    >>> img = np.linspace(0, 1, 64 * 64).reshape(64, 64)
    >>> est = ElmInr(side=32, m=64, overlap=0).fit(img)
    >>> est.predict().shape
    (64, 64, 1)
    """

    def __init__(self, side=32, tau=None, target_n=None, atomic=16, temporal_patch=None, m=1024,
                 F=10, sigma_rff=1.0, use_rff=True, bias_column=True, ridge=None,
                 solver_mode="auto", overlap=None, global_seed=0, rng_algorithm="pcg64",
                 threads=None):
        self.side = side
        self.tau = tau
        self.target_n = target_n
        self.atomic = atomic
        self.temporal_patch = temporal_patch
        self.m = m
        self.F = F
        self.sigma_rff = sigma_rff
        self.use_rff = use_rff
        self.bias_column = bias_column
        self.ridge = ridge
        self.solver_mode = solver_mode
        self.overlap = overlap
        self.global_seed = global_seed
        self.rng_algorithm = rng_algorithm
        self.threads = threads

    def _config(self) -> FitConfig:
        return FitConfig(**self.get_params())

    def fit(self, X, y=None):
        signal = check_signal(X, has_time=self.temporal_patch is not None)
        result = fit(signal, self._config())
        self.models_ = result.models
        self.pou_ = result.pou
        self.partition_ = result.partition
        self.report_ = result.report
        self.signal_shape_ = signal.shape
        self.n_channels_ = signal.channels
        return self

    def predict(self, query_shape=None) -> np.ndarray:
        """Reconstruction on ``query_shape`` (defaults to the training grid)."""
        check_is_fitted(self, "models_")
        return reconstruct(self.models_, self.pou_, query_shape).values

    def score(self, X, y=None) -> float:
        """PSNR in dB of the training-grid reconstruction against ``X``."""
        signal = check_signal(X)
        check_is_fitted(self, "models_")
        return metrics.psnr(reconstruct(self.models_, self.pou_), signal)

    def error_complexity_correlation(self):
        check_is_fitted(self, "report_")
        return error_complexity_correlation(self.report_)


class BeamMesher(TransformerMixin, BaseEstimator):
    """Adaptive mesher: ``transform`` returns the per-sample region label map."""

    def __init__(self, atomic=16, tau=None, target_n=None, side=32):
        self.atomic = atomic
        self.tau = tau
        self.target_n = target_n
        self.side = side

    def fit(self, X, y=None):
        signal = check_signal(X)
        cfg = FitConfig(side=self.side, atomic=self.atomic, tau=self.tau, target_n=self.target_n)
        self.partition_ = build_partition(signal, cfg)
        self.n_regions_ = len(self.partition_)
        return self

    def transform(self, X):
        check_is_fitted(self, "partition_")
        signal = check_signal(X)
        if signal.shape != self.partition_.signal_shape:
            raise ValueError(f"X has grid shape {signal.shape}, mesher was fit on {self.partition_.signal_shape}")
        return self.partition_.sample_labels()
