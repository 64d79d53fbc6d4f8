"""Closed-form implicit neural representations on partitioned domains."""

from .estimator import BeamMesher, ElmInr
from .features import CoordMap, HiddenLayer, RffEncoder, hidden_activations, normalize_coords, rff_encode
from .local_solver import LocalModel, predict_local, solve_local
from .metrics import mae, mse, psnr
from .partition import (
    Partition,
    Region,
    beam_partition,
    beam_partition_to_count,
    load_partition,
    neighbors,
    regular_mesh,
    render_partition,
    save_partition,
)
from .pipeline import FitConfig, FitReport, error_complexity_correlation, fit, reconstruct
from .pou import PouField, blend, build_pou
from .spectral import barron_energy
from .tensor_io import SignalTensor, load_image, load_tensor, save_image, save_tensor

__version__ = "0.1.0"
