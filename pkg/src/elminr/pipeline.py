"""End-to-end fitting: partition, local closed-form solves, blending, report."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np
from scipy.stats import spearmanr

from . import metrics
from .features import CoordMap, HiddenLayer, RffEncoder, RNG_ALGORITHMS
from .local_solver import SOLVER_MODES, LocalModel, fit_local_model
from .partition import Partition, beam_partition, beam_partition_to_count, regular_mesh
from .pou import PouField, blend, build_pou
from .tensor_io import SignalTensor


@dataclass
class FitConfig:
    """Flat fit configuration; key names double as config-file keys.

    Mesh selection: ``tau`` picks threshold BEAM, ``target_n`` picks BEAM to
    a fixed region count, otherwise a regular mesh of ``side``. ``overlap``
    of ``None`` means ``max(2, side // 8)`` on regular meshes and 2 on BEAM.
    """

    side: int = 32
    tau: float | None = None
    target_n: int | None = None
    atomic: int = 16
    temporal_patch: int | None = None
    m: int = 1024
    F: int = 10
    sigma_rff: float = 1.0
    use_rff: bool = True
    bias_column: bool = True
    ridge: float | None = None
    solver_mode: str = "auto"
    overlap: float | None = None
    global_seed: int = 0
    rng_algorithm: str = "pcg64"
    threads: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.F < 1:
            raise ValueError("F must be >= 1")
        if self.sigma_rff <= 0:
            raise ValueError("sigma_rff must be > 0")
        if self.side < 2:
            raise ValueError("side must be >= 2")
        if self.atomic < 1:
            raise ValueError("atomic must be >= 1")
        if self.tau is not None and self.target_n is not None:
            raise ValueError("tau and target_n are mutually exclusive")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.target_n is not None and self.target_n < 1:
            raise ValueError("target_n must be >= 1")
        if self.temporal_patch is not None and self.temporal_patch < 1:
            raise ValueError("temporal_patch must be >= 1")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.overlap is not None and self.overlap < 0:
            raise ValueError("overlap must be >= 0")
        if self.solver_mode not in SOLVER_MODES:
            raise ValueError(f"solver_mode must be one of {SOLVER_MODES}")
        if self.rng_algorithm not in RNG_ALGORITHMS:
            raise ValueError(f"rng_algorithm must be one of {sorted(RNG_ALGORITHMS)}")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def mesh_kind(self) -> str:
        if self.tau is not None:
            return "beam"
        if self.target_n is not None:
            return "beam_count"
        return "regular"

    def resolved_overlap(self) -> float:
        if self.overlap is not None:
            return float(self.overlap)
        if self.mesh_kind == "regular":
            return float(max(2, self.side // 8))
        return 2.0

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RegionReport:
    id: int
    cells: int
    samples: int
    energy: float
    local_mse: float
    local_l2: float
    feature_ms: float
    solve_ms: float


@dataclass
class FitReport:
    psnr_db: float
    psnr_per_channel: list
    mae: float
    mse: float
    n_regions: int
    regions: list = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d["timings_ms"] = {k: 0.0 for k in d["timings_ms"]}
            for r in d["regions"]:
                r["feature_ms"] = r["solve_ms"] = 0.0
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2)

    def metrics_dict(self) -> dict:
        """Everything except wall-clock timings."""
        d = self.to_dict(timings=False)
        d.pop("timings_ms")
        return d


class FitResult(NamedTuple):
    models: list
    pou: PouField
    partition: Partition
    report: FitReport
    reconstruction: SignalTensor


def as_signal(signal) -> SignalTensor:
    if isinstance(signal, SignalTensor):
        return signal
    return SignalTensor.from_array(signal)


def build_partition(signal: SignalTensor, cfg: FitConfig) -> Partition:
    shape = signal.shape
    if cfg.mesh_kind == "regular":
        tp = cfg.temporal_patch if signal.has_time else None
        return regular_mesh(shape, cfg.side, tp, signal=signal)
    if signal.has_time:
        sizes = (cfg.atomic,) * (len(shape) - 1) + (cfg.temporal_patch or cfg.atomic,)
    else:
        sizes = (cfg.atomic,) * len(shape)
    if cfg.mesh_kind == "beam":
        return beam_partition(signal, sizes, cfg.tau)
    return beam_partition_to_count(signal, sizes, cfg.target_n)


def _grid_points(index) -> np.ndarray:
    return np.stack(np.meshgrid(*[i.astype(np.float64) for i in index], indexing="ij"), axis=-1)


def fit(signal, cfg: FitConfig | None = None, partition: Partition | None = None) -> FitResult:
    """Fit one local ELM per region and blend them into a global field.

    A precomputed ``partition`` may be passed to skip mesh construction.
    """
    cfg = cfg or FitConfig()
    cfg.validate()
    signal = as_signal(signal)
    values = signal.values
    timings = {}

    t0 = time.perf_counter()
    p = partition if partition is not None else build_partition(signal, cfg)
    if p.signal_shape != signal.shape:
        raise ValueError(f"partition covers {p.signal_shape}, signal is {signal.shape}")
    timings["partition"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    pou = build_pou(p, cfg.resolved_overlap())
    d = signal.ndim
    encoder = None
    if cfg.use_rff:
        encoder = RffEncoder.create(d, cfg.F, cfg.sigma_rff, cfg.global_seed, cfg.rng_algorithm)
    in_dim = encoder.output_dim if encoder is not None else d
    timings["setup"] = (time.perf_counter() - t0) * 1e3

    def solve_region(k):
        region = p.regions[k]
        tf = time.perf_counter()
        index, live = pou.support_samples(k)
        points = _grid_points(index)[live]
        targets = values[np.ix_(*index)][live]
        hidden = HiddenLayer.create(in_dim, cfg.m, cfg.global_seed, region.id, cfg.rng_algorithm)
        cmap = CoordMap.from_bbox(region.bbox)
        feature_ms = (time.perf_counter() - tf) * 1e3
        ts = time.perf_counter()
        model = fit_local_model(region.id, hidden, encoder, cmap, points, targets, cfg.ridge,
                                cfg.solver_mode, cfg.bias_column)
        return model, feature_ms, (time.perf_counter() - ts) * 1e3

    t0 = time.perf_counter()
    threads = cfg.threads or os.cpu_count() or 1
    if threads == 1:
        results = [solve_region(k) for k in range(len(p.regions))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_region, range(len(p.regions))))
    timings["local_fits"] = (time.perf_counter() - t0) * 1e3
    models = [r[0] for r in results]
    timings["features"] = float(sum(r[1] for r in results))
    timings["solve"] = float(sum(r[2] for r in results))

    t0 = time.perf_counter()
    recon = SignalTensor(blend(pou, models), has_time=signal.has_time)
    timings["blend"] = (time.perf_counter() - t0) * 1e3

    report = _make_report(signal, recon, p, results, timings, cfg)
    return FitResult(models, pou, p, report, recon)


def _make_report(signal, recon, p, results, timings, cfg) -> FitReport:
    peak = signal.values.max()
    if not peak > 0:
        raise ValueError("signal maximum must be positive for PSNR normalization")
    err = (recon.values - signal.values) / peak
    labels = p.sample_labels()
    sq = (err * err).sum(axis=-1).reshape(-1)
    sums = np.bincount(labels.reshape(-1), weights=sq, minlength=max(r.id for r in p.regions) + 1)
    counts = np.bincount(labels.reshape(-1), minlength=len(sums))
    regions = []
    for r, (_, feat_ms, solve_ms) in zip(p.regions, results):
        n = int(counts[r.id])
        regions.append(RegionReport(
            id=r.id,
            cells=len(r.cells),
            samples=n,
            energy=float(r.energy),
            local_mse=float(sums[r.id] / (n * signal.channels)),
            local_l2=float(np.sqrt(sums[r.id])),
            feature_ms=float(feat_ms),
            solve_ms=float(solve_ms),
        ))
    per_channel = metrics.channel_psnr(recon, signal)
    return FitReport(
        psnr_db=float(np.mean(per_channel)),
        psnr_per_channel=[float(v) for v in per_channel],
        mae=metrics.mae(recon, signal),
        mse=metrics.mse(recon, signal),
        n_regions=len(p.regions),
        regions=regions,
        timings_ms={k: float(v) for k, v in timings.items()},
        config=cfg.to_dict(),
    )


def reconstruct(models, pou: PouField, query_shape=None) -> SignalTensor:
    """Evaluate the blended field on the training grid or a finer/coarser one."""
    return SignalTensor(blend(pou, models, query_shape))


class Correlation(NamedTuple):
    value: float
    degenerate: bool


def error_complexity_correlation(report: FitReport) -> Correlation:
    """Spearman rank correlation between region energy and region error."""
    energy = np.array([r.energy for r in report.regions])
    error = np.array([r.local_mse for r in report.regions])
    if len(energy) < 2 or np.ptp(energy) == 0 or np.ptp(error) == 0:
        return Correlation(0.0, True)
    rho = spearmanr(energy, error).statistic
    if not np.isfinite(rho):
        return Correlation(0.0, True)
    return Correlation(float(rho), False)


psnr = metrics.psnr
mse = metrics.mse
mae = metrics.mae
