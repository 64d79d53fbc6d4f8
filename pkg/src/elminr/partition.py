"""Domain decompositions over an atomic cell grid.

A :class:`Partition` groups the cells of an atomic grid into connected
regions. Regular meshes use one cell per region; BEAM meshes start from
small atomic cells and merge neighbors bottom-up while keeping the spectral
energy of every merged region small.

Cells are numbered row-major over the atomic grid. Along each axis cells
have the atomic size, except the last one, which absorbs any remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .spectral import barron_energy
from .tensor_io import SignalTensor

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Region:
    id: int
    cells: frozenset
    bbox: tuple  # ((lo, hi), ...) inclusive sample coordinates per axis
    energy: float = 0.0

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class Partition:
    regions: list
    atomic_size: tuple
    grid_dims: tuple
    signal_shape: tuple
    kind: str = "regular"
    _labels: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.atomic_size = tuple(int(v) for v in self.atomic_size)
        self.grid_dims = tuple(int(v) for v in self.grid_dims)
        self.signal_shape = tuple(int(v) for v in self.signal_shape)

    def __len__(self):
        return len(self.regions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.grid_dims))

    @property
    def edges(self) -> list:
        return cell_edges(self.signal_shape, self.atomic_size)

    def region(self, region_id: int) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(f"unknown region id {region_id}")

    def cell_labels(self) -> np.ndarray:
        """Atomic-grid array holding the owning region id of every cell."""
        if self._labels is None:
            labels = np.full(self.n_cells, -1, dtype=np.int64)
            for r in self.regions:
                labels[list(r.cells)] = r.id
            self._labels = labels.reshape(self.grid_dims)
        return self._labels

    def sample_labels(self) -> np.ndarray:
        """Sample-grid array holding the owning region id of every sample."""
        labels = self.cell_labels()
        for axis, e in enumerate(self.edges):
            labels = np.repeat(labels, np.diff(e), axis=axis)
        return labels

    def region_mask(self, region: Region):
        """Bounding-box slices of ``region`` and its membership mask inside them."""
        slices = tuple(slice(lo, hi + 1) for lo, hi in region.bbox)
        if self.kind == "regular" or len(region.cells) == 1:
            shape = tuple(hi - lo + 1 for lo, hi in region.bbox)
            return slices, np.ones(shape, dtype=bool)
        return slices, self.sample_labels()[slices] == region.id

    def is_rectangular(self, region: Region) -> bool:
        cb = cell_bbox(region.cells, self.grid_dims)
        return len(region.cells) == int(np.prod([hi - lo + 1 for lo, hi in cb]))


class MergeEvent(NamedTuple):
    sweep: int
    initiator: int
    partner: int
    new_id: int
    energy: float


def cell_edges(signal_shape, sizes) -> list:
    """Per-axis cell boundaries; the last cell absorbs the remainder."""
    edges = []
    for n, s in zip(signal_shape, sizes):
        count = max(1, n // s)
        e = [i * s for i in range(count)] + [n]
        edges.append(np.asarray(e, dtype=np.int64))
    return edges


def _adjacent_labels(cells, labels, own) -> list:
    grid_dims = labels.shape
    found = set()
    for c in cells:
        idx = np.unravel_index(c, grid_dims)
        for axis in range(len(grid_dims)):
            for step in (-1, 1):
                j = idx[axis] + step
                if 0 <= j < grid_dims[axis]:
                    nb = list(idx)
                    nb[axis] = j
                    lab = int(labels[tuple(nb)])
                    if lab != own:
                        found.add(lab)
    return sorted(found)


def cell_bbox(cells, grid_dims) -> tuple:
    coords = np.array(np.unravel_index(sorted(cells), grid_dims)).T
    return tuple((int(lo), int(hi)) for lo, hi in zip(coords.min(0), coords.max(0)))


def _sample_bbox(cells, grid_dims, edges) -> tuple:
    cb = cell_bbox(cells, grid_dims)
    return tuple((int(e[lo]), int(e[hi + 1] - 1)) for (lo, hi), e in zip(cb, edges))


def _check_shape(signal_shape):
    if len(signal_shape) < 1 or any(n < 2 for n in signal_shape):
        raise ValueError(f"degenerate signal shape {tuple(signal_shape)}: every axis needs >= 2 samples")


def _atomic_sizes(signal_shape, side, temporal_patch=None, has_time=False) -> tuple:
    ndim = len(signal_shape)
    if np.ndim(side) == 1:
        sizes = tuple(int(v) for v in side)
        if len(sizes) != ndim:
            raise ValueError(f"need {ndim} atomic sizes, got {len(sizes)}")
        return sizes
    side = int(side)
    if temporal_patch is not None or has_time:
        tp = int(temporal_patch) if temporal_patch is not None else side
        return (side,) * (ndim - 1) + (tp,)
    return (side,) * ndim


def _empty_partition(signal_shape, sizes, kind) -> Partition:
    edges = cell_edges(signal_shape, sizes)
    grid_dims = tuple(len(e) - 1 for e in edges)
    return Partition([], sizes, grid_dims, signal_shape, kind)


def regular_mesh(signal_shape, subdomain_side, temporal_patch=None, signal=None) -> Partition:
    """Axis-aligned tiling with one region per cell.

    ``subdomain_side`` applies to every axis unless ``temporal_patch`` is
    given, in which case the last axis is cut into chunks of that length.
    A per-axis sequence of sizes is also accepted. If ``signal`` is passed,
    region energies are filled in.
    """
    signal_shape = tuple(int(n) for n in signal_shape)
    _check_shape(signal_shape)
    sizes = _atomic_sizes(signal_shape, subdomain_side, temporal_patch)
    spatial = sizes[:-1] if temporal_patch is not None else sizes
    if min(spatial) < 2 or min(sizes) < 1:
        raise ValueError(f"subdomain side must be >= 2, got {sizes}")
    p = _empty_partition(signal_shape, sizes, "regular")
    values = None if signal is None else _values(signal)
    regions = []
    for cid in range(p.n_cells):
        bbox = _sample_bbox([cid], p.grid_dims, p.edges)
        energy = 0.0
        if values is not None:
            energy = barron_energy(values[tuple(slice(lo, hi + 1) for lo, hi in bbox)])
        regions.append(Region(cid, frozenset([cid]), bbox, energy))
    p.regions = regions
    return p


def _values(signal) -> np.ndarray:
    if isinstance(signal, SignalTensor):
        return signal.values
    return SignalTensor.from_array(signal).values


class _MergeState:
    """Mutable working set for the greedy merge loops."""

    def __init__(self, values, sizes):
        self.values = values
        signal_shape = values.shape[:-1]
        _check_shape(signal_shape)
        if any(s < 1 for s in sizes):
            raise ValueError("atomic size must be >= 1")
        self.edges = cell_edges(signal_shape, sizes)
        self.grid_dims = tuple(len(e) - 1 for e in self.edges)
        self.sizes = sizes
        self.signal_shape = signal_shape
        n = int(np.prod(self.grid_dims))
        self.labels = np.arange(n, dtype=np.int64).reshape(self.grid_dims)
        self.cells = {i: frozenset([i]) for i in range(n)}
        self.energy = {i: self._energy(self.cells[i]) for i in range(n)}
        self.next_id = n
        self._union_cache: dict = {}

    def _energy(self, cells) -> float:
        cb = cell_bbox(cells, self.grid_dims)
        sl = tuple(slice(e[lo], e[hi + 1]) for (lo, hi), e in zip(cb, self.edges))
        patch = self.values[sl]
        if len(cells) == int(np.prod([hi - lo + 1 for lo, hi in cb])):
            return barron_energy(patch)
        sub = np.zeros(self.grid_dims, dtype=bool).reshape(-1)
        sub[list(cells)] = True
        sub = sub.reshape(self.grid_dims)[tuple(slice(lo, hi + 1) for lo, hi in cb)]
        for axis, e in enumerate(self.edges):
            lo, hi = cb[axis]
            sub = np.repeat(sub, np.diff(e[lo : hi + 2]), axis=axis)
        return barron_energy(patch, mask=sub)

    def neighbors(self, rid) -> list:
        return _adjacent_labels(self.cells[rid], self.labels, rid)

    def union_energy(self, a, b) -> float:
        key = (min(a, b), max(a, b))
        if key not in self._union_cache:
            self._union_cache[key] = self._energy(self.cells[a] | self.cells[b])
        return self._union_cache[key]

    def best_partner(self, rid):
        """Neighbor minimizing the union energy; lowest id wins near-ties."""
        scored = [(self.union_energy(rid, nb), nb) for nb in self.neighbors(rid)]
        if not scored:
            return None, np.inf
        best_e = min(e for e, _ in scored)
        tol = TIE_TOL * max(1.0, abs(best_e))
        best_id = min(nb for e, nb in scored if e - best_e <= tol)
        return best_id, self.union_energy(rid, best_id)

    def merge(self, a, b, energy) -> int:
        new = self.next_id
        self.next_id += 1
        self.cells[new] = self.cells.pop(a) | self.cells.pop(b)
        del self.energy[a], self.energy[b]
        self.energy[new] = energy
        flat = self.labels.reshape(-1)
        flat[list(self.cells[new])] = new
        return new

    def ascending(self) -> list:
        return sorted(self.energy, key=lambda r: (self.energy[r], r))

    def to_partition(self) -> Partition:
        # renumber by smallest member cell so ids are compact and stable
        order = sorted(self.cells, key=lambda r: min(self.cells[r]))
        regions = [
            Region(i, self.cells[r], _sample_bbox(self.cells[r], self.grid_dims, self.edges), self.energy[r])
            for i, r in enumerate(order)
        ]
        return Partition(regions, self.sizes, self.grid_dims, self.signal_shape, "beam")


def beam_partition(signal, atomic_size, tau: float, trace: list | None = None) -> Partition:
    """Threshold-driven bottom-up merging (BEAM).

    Each sweep visits regions in ascending energy order (ties by id) using a
    snapshot taken at sweep start. A region below ``tau`` is merged with the
    neighbor whose union has the smallest energy, provided that union energy
    is at most ``tau``. Sweeps repeat until one performs no merge.

    Merged regions get fresh ids during the run; pass a list as ``trace`` to
    collect :class:`MergeEvent` records in those working ids. The returned
    partition is renumbered by smallest member cell.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    values = _values(signal)
    sizes = _atomic_sizes(values.shape[:-1], atomic_size)
    st = _MergeState(values, sizes)
    sweep = 0
    while True:
        merged = False
        for rid in st.ascending():
            if rid not in st.energy or not st.energy[rid] < tau:
                continue
            partner, e_new = st.best_partner(rid)
            if partner is not None and e_new <= tau:
                new = st.merge(rid, partner, e_new)
                merged = True
                if trace is not None:
                    trace.append(MergeEvent(sweep, rid, partner, new, e_new))
        sweep += 1
        if not merged:
            break
    return st.to_partition()


def beam_partition_to_count(signal, atomic_size, target_n: int, trace: list | None = None) -> Partition:
    """Merge the lowest-energy region with its best neighbor until ``target_n`` regions remain."""
    values = _values(signal)
    sizes = _atomic_sizes(values.shape[:-1], atomic_size)
    st = _MergeState(values, sizes)
    n_cells = len(st.cells)
    if not 1 <= target_n <= n_cells:
        raise ValueError(f"target_n must be in [1, {n_cells}], got {target_n}")
    step = 0
    while len(st.cells) > target_n:
        for rid in st.ascending():
            partner, e_new = st.best_partner(rid)
            if partner is not None:
                break
        else:  # pragma: no cover - a connected grid always has a neighbor pair
            raise RuntimeError("no mergeable region pair left")
        new = st.merge(rid, partner, e_new)
        if trace is not None:
            trace.append(MergeEvent(step, rid, partner, new, e_new))
        step += 1
    return st.to_partition()


def neighbors(p: Partition, region_id: int) -> list:
    """Ids of regions sharing an atomic-cell face with ``region_id``."""
    region = p.region(region_id)
    return _adjacent_labels(region.cells, p.cell_labels(), region_id)


def boundary_mask(p: Partition) -> np.ndarray:
    """Sample-grid mask of the 1-pixel region boundaries plus the domain frame.

    A sample is marked when the next sample along some axis belongs to a
    different region.
    """
    labels = p.sample_labels()
    mask = np.zeros(labels.shape, dtype=bool)
    for axis in range(labels.ndim):
        lo = [slice(None)] * labels.ndim
        hi = [slice(None)] * labels.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        mask[tuple(lo)] |= labels[tuple(lo)] != labels[tuple(hi)]
        first = [slice(None)] * labels.ndim
        last = [slice(None)] * labels.ndim
        first[axis] = 0
        last[axis] = -1
        mask[tuple(first)] = True
        mask[tuple(last)] = True
    return mask


def render_partition(p: Partition, signal, color=(1.0, 0.0, 0.0)) -> SignalTensor:
    """RGB overlay of region boundaries on a grayscale version of ``signal``.

    Volumes are rendered at their first time slice.
    """
    values = _values(signal)
    if values.shape[:-1] != p.signal_shape:
        raise ValueError(f"signal shape {values.shape[:-1]} does not match partition {p.signal_shape}")
    gray = values.mean(axis=-1)
    lo, hi = gray.min(), gray.max()
    gray = (gray - lo) / (hi - lo) if hi > lo else np.zeros_like(gray)
    mask = boundary_mask(p)
    while gray.ndim > 2:
        gray, mask = gray[..., 0], mask[..., 0]
    rgb = np.repeat(gray[..., None], 3, axis=-1)
    rgb[mask] = color
    return SignalTensor(rgb)


# --- text serialization -----------------------------------------------------

_HEADER = "# elminr partition v1"


def dumps(p: Partition) -> str:
    lines = [
        _HEADER,
        f"kind {p.kind}",
        "signal_shape " + " ".join(map(str, p.signal_shape)),
        "atomic_size " + " ".join(map(str, p.atomic_size)),
        "grid_dims " + " ".join(map(str, p.grid_dims)),
    ]
    for r in p.regions:
        lines.append(f"{r.id}: " + ",".join(map(str, sorted(r.cells))))
    lines.append("energies: " + " ".join(repr(float(r.energy)) for r in p.regions))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Partition:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not a partition file")
    fields = {}
    cells = []
    energies = None
    for ln in lines[1:]:
        if ln.startswith("energies:"):
            energies = [float(v) for v in ln.split(":", 1)[1].split()]
        elif ":" in ln:
            rid, rest = ln.split(":", 1)
            cells.append((int(rid), frozenset(int(c) for c in rest.split(",") if c.strip())))
        else:
            key, *vals = ln.split()
            fields[key] = vals
    shape = tuple(int(v) for v in fields["signal_shape"])
    sizes = tuple(int(v) for v in fields["atomic_size"])
    grid_dims = tuple(int(v) for v in fields["grid_dims"])
    edges = cell_edges(shape, sizes)
    if tuple(len(e) - 1 for e in edges) != grid_dims:
        raise ValueError("grid_dims inconsistent with signal_shape/atomic_size")
    if energies is None:
        energies = [0.0] * len(cells)
    regions = [
        Region(rid, cs, _sample_bbox(cs, grid_dims, edges), e) for (rid, cs), e in zip(cells, energies)
    ]
    p = Partition(regions, sizes, grid_dims, shape, fields["kind"][0])
    validate(p)
    return p


def save_partition(p: Partition, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(p))


def load_partition(path) -> Partition:
    with open(path) as fh:
        return loads(fh.read())


def validate(p: Partition) -> None:
    """Raise ``ValueError`` unless every cell lies in exactly one connected region."""
    seen = np.zeros(p.n_cells, dtype=np.int64)
    for r in p.regions:
        if not r.cells:
            raise ValueError(f"region {r.id} is empty")
        idx = np.fromiter(r.cells, dtype=np.int64)
        if idx.min() < 0 or idx.max() >= p.n_cells:
            raise ValueError(f"region {r.id} references cells outside the grid")
        seen[idx] += 1
    if not np.all(seen == 1):
        raise ValueError("regions do not form a disjoint cover of the atomic grid")
    for r in p.regions:
        if not _connected(r.cells, p.grid_dims):
            raise ValueError(f"region {r.id} is not face-connected")


def _connected(cells, grid_dims) -> bool:
    cells = set(cells)
    start = next(iter(cells))
    stack, seen = [start], {start}
    while stack:
        c = stack.pop()
        idx = np.unravel_index(c, grid_dims)
        for axis in range(len(grid_dims)):
            for step in (-1, 1):
                j = idx[axis] + step
                if 0 <= j < grid_dims[axis]:
                    nb = list(idx)
                    nb[axis] = j
                    k = int(np.ravel_multi_index(nb, grid_dims))
                    if k in cells and k not in seen:
                        seen.add(k)
                        stack.append(k)
    return len(seen) == len(cells)
