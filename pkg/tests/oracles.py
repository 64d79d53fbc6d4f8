"""Slow, independent reference implementations used only by the tests."""

import itertools

import numpy as np


def centered_range(n):
    return np.arange(-(n // 2), (n + 1) // 2)


def direct_energy(patch, mask=None):
    """sum_k ||k||_1 |F(k)| by explicit summation over samples, per channel.

    ``patch`` is (*grid, C). No FFT involved: every frequency bin is a
    direct sum of exponentials over the sample grid.
    """
    patch = np.asarray(patch, dtype=float)
    grid = patch.shape[:-1]
    total = 0.0
    for c in range(patch.shape[-1]):
        x = patch[..., c]
        sel = np.ones(grid, bool) if mask is None else np.asarray(mask, bool)
        x = np.where(sel, x - x[sel].mean(), 0.0)
        n_total = np.prod(grid)
        coords = np.indices(grid).reshape(len(grid), -1).T
        flat = x.reshape(-1)
        for k in itertools.product(*[centered_range(n) for n in grid]):
            phase = sum(k[a] * coords[:, a] / grid[a] for a in range(len(grid)))
            Fk = np.sum(flat * np.exp(-2j * np.pi * phase)) / np.sqrt(n_total)
            total += sum(abs(v) for v in k) * abs(Fk)
    return total


def direct_energy_fast(patch):
    """Same quantity with explicit DFT matrices (2-D, still no FFT)."""
    patch = np.asarray(patch, dtype=float)
    total = 0.0
    n0, n1 = patch.shape[:2]
    k0, k1 = centered_range(n0), centered_range(n1)
    E0 = np.exp(-2j * np.pi * np.outer(k0, np.arange(n0)) / n0)
    E1 = np.exp(-2j * np.pi * np.outer(k1, np.arange(n1)) / n1)
    weight = np.abs(k0)[:, None] + np.abs(k1)[None, :]
    for c in range(patch.shape[-1]):
        x = patch[..., c] - patch[..., c].mean()
        F = E0 @ x @ E1.T / np.sqrt(n0 * n1)
        total += float(np.sum(weight * np.abs(F)))
    return total


def adjacency_bruteforce(partition, region_id):
    """Neighbors by scanning every pair of cells for a shared face."""
    dims = partition.grid_dims
    own = partition.region(region_id).cells
    owner = {c: r.id for r in partition.regions for c in r.cells}
    out = set()
    for a in own:
        ia = np.array(np.unravel_index(a, dims))
        for b in range(int(np.prod(dims))):
            if owner[b] == region_id:
                continue
            ib = np.array(np.unravel_index(b, dims))
            if np.abs(ia - ib).sum() == 1:
                out.add(owner[b])
    return sorted(out)


def relu_layer_loop(W, b, inputs):
    S, m = inputs.shape[0], W.shape[0]
    H = np.zeros((S, m))
    for k in range(S):
        for j in range(m):
            z = b[j]
            for i in range(W.shape[1]):
                z += W[j, i] * inputs[k, i]
            H[k, j] = z if z > 0 else 0.0
    return H


def raised_cosine_1d(depth, o):
    if depth <= -o:
        return 0.0
    if depth >= o:
        return 1.0
    return 0.5 - 0.5 * np.cos(np.pi * (depth + o) / (2 * o))
