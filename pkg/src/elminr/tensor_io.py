"""Signal containers and bit-exact file I/O.

Two on-disk formats are supported:

* PNG, for 8/16-bit grayscale or RGB images (values scaled to [0, 1]).
* ETNS, a small self-describing binary tensor format::

      magic   4 bytes  b"ETNS"
      version u8       1
      dtype   u8       0 = float32
      rank    u8       2, 3 or 4
      dims    rank x u64 little-endian
      payload row-major little-endian float32

Rank 2 is H x W, rank 4 is H x W x T x C. Rank 3 is ambiguous (H x W x C or
H x W x T); see :func:`load_tensor` for how it is resolved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ETNS"
VERSION = 1
DTYPE_FLOAT32 = 0

# rank-3 tensors whose trailing axis is at most this long are read as channels
MAX_RANK3_CHANNELS = 16

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class TensorFormatError(ValueError):
    """Raised for malformed or unsupported signal files."""


@dataclass
class SignalTensor:
    """Dense multichannel gridded signal.

    ``values`` has shape ``(*shape, channels)``: spatial axes first, an
    optional time axis next, channels last.
    """

    values: np.ndarray
    value_range: tuple[float, float] | None = None
    has_time: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim < 2:
            raise ValueError("a signal needs at least one grid axis and a channel axis")
        if not np.all(np.isfinite(values)):
            raise ValueError("signal contains non-finite values")
        self.values = values
        if self.value_range is None and values.size:
            self.value_range = (float(values.min()), float(values.max()))

    @classmethod
    def from_array(cls, array, channels_last: bool | None = None, **kw) -> "SignalTensor":
        """Wrap a plain array. 2-D arrays become single-channel signals."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2 or channels_last is False:
            array = array[..., None]
        return cls(array, **kw)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def __len__(self):
        return int(np.prod(self.shape))


def _png_header(raw: bytes) -> tuple[int, int]:
    if raw[:8] != _PNG_SIGNATURE or raw[12:16] != b"IHDR":
        raise TensorFormatError("not a PNG file")
    return raw[24], raw[25]


def load_image(path) -> SignalTensor:
    """Load an 8- or 16-bit grayscale/RGB PNG into a [0, 1] signal."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise TensorFormatError(f"cannot read {path}: {exc}") from exc
    bit_depth, color_type = _png_header(raw)
    if color_type not in (0, 2):
        raise TensorFormatError(f"unsupported PNG color type {color_type} (need grayscale or RGB)")
    if bit_depth not in (8, 16):
        raise TensorFormatError(f"unsupported bit depth {bit_depth}")

    if bit_depth == 16 and color_type == 2:
        # Pillow truncates 16-bit RGB to 8 bits
        try:
            import cv2
        except ImportError as exc:
            raise TensorFormatError("16-bit RGB PNG needs opencv-python") from exc
        arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise TensorFormatError(f"cannot decode {path}")
        arr = arr[..., ::-1]
    else:
        from PIL import Image

        try:
            with Image.open(path) as im:
                arr = np.asarray(im)
        except Exception as exc:
            raise TensorFormatError(f"cannot decode {path}: {exc}") from exc

    scale = float(2**bit_depth - 1)
    raw_values = arr.astype(np.float64)
    values = raw_values / scale
    if values.ndim == 2:
        values = values[..., None]
    return SignalTensor(
        values,
        value_range=(float(raw_values.min()), float(raw_values.max())),
        meta={"source": str(path), "bit_depth": bit_depth},
    )


def save_image(t: SignalTensor, path) -> None:
    """Write a 1- or 3-channel 2-D signal as an 8-bit PNG.

    Values are clamped to [0, 1] and quantized with ``floor(v * 255 + 0.5)``.
    """
    from PIL import Image

    if t.ndim != 2 or t.channels not in (1, 3):
        raise ValueError(
            f"image export needs a 2-D signal with 1 or 3 channels, got shape {t.shape} x {t.channels}"
        )
    pixels = quantize_8bit(t.values)
    if t.channels == 1:
        pixels = pixels[..., 0]
    Image.fromarray(pixels).save(path, format="PNG")


def quantize_8bit(values) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def save_tensor(t: SignalTensor, path) -> None:
    """Write ``t`` in ETNS format (float32 payload)."""
    dims = list(t.shape)
    if t.channels > 1:
        dims.append(t.channels)
    rank = len(dims)
    if rank not in (2, 3, 4):
        raise ValueError(f"ETNS supports rank 2-4, signal has rank {rank}")
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_FLOAT32, rank)
    header += struct.pack(f"<{rank}Q", *dims)
    payload = np.ascontiguousarray(t.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_tensor(path, layout: str | None = None) -> SignalTensor:
    """Read an ETNS file.

    ``layout`` disambiguates rank-3 files: ``"channels"`` (H x W x C) or
    ``"time"`` (H x W x T). By default a trailing axis of length at most
    ``MAX_RANK3_CHANNELS`` is taken as channels, anything longer as time.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise TensorFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 7:
        raise TensorFormatError("truncated header")
    if raw[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    version, dtype, rank = struct.unpack("<BBB", raw[4:7])
    if version != VERSION:
        raise TensorFormatError(f"version mismatch: {version} (expected {VERSION})")
    if dtype != DTYPE_FLOAT32:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    if rank not in (2, 3, 4):
        raise TensorFormatError(f"unsupported rank {rank}")
    end = 7 + 8 * rank
    if len(raw) < end:
        raise TensorFormatError("truncated header")
    dims = struct.unpack(f"<{rank}Q", raw[7:end])
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"zero-length axis in dims {dims}")
    expected = 4 * int(np.prod(dims))
    if len(raw) - end != expected:
        raise TensorFormatError(
            f"payload is {len(raw) - end} bytes, header dims {list(dims)} need {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=end).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise TensorFormatError("payload contains non-finite values")
    values = data.astype(np.float64)

    if rank == 2:
        values, has_time = values[..., None], False
    elif rank == 4:
        has_time = True
    else:
        if layout is None:
            layout = "channels" if dims[-1] <= MAX_RANK3_CHANNELS else "time"
        if layout == "channels":
            has_time = False
        elif layout == "time":
            values, has_time = values[..., None], True
        else:
            raise ValueError(f"unknown layout {layout!r}")
    return SignalTensor(values, has_time=has_time, meta={"source": str(path)})
