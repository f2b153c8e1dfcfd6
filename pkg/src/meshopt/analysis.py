"""Bandedness metrics, error maps, and checkerboard grid exports.

The eta-bandsize quantifies how banded a unitary is: the minimum number of
matrix elements whose squared magnitudes capture a (1 - eta) fraction of the
total power. Two readings are reported, because they answer slightly
different questions:

* ``global_count``: smallest k such that the k largest |u_ij|^2 over the
  whole matrix sum to at least (1 - eta) N.
* ``per_row_mean``: per row, the smallest k such that the row's k largest
  |u_ij|^2 capture (1 - eta) of that row's power, averaged over rows. This
  is the photonic reading (the fraction of output ports carrying 99.9% of
  the power from one input) and is the headline number.

Both are invariant under row/column permutations. Haar-random matrices are
unbanded (per-row fraction near 1); uniform-randomly initialized rectangular
meshes become increasingly banded as N grows.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .haar import canonicalize_theta, initialization_alpha

__all__ = ["Bandsize", "bandsize", "error_map", "checkerboard",
           "save_grid_csv", "save_fields_csv"]

DEFAULT_ETA = 0.001

CHECKERBOARD_QUANTITIES = ("theta", "xi", "alpha", "avg-r")


@dataclass(frozen=True)
class Bandsize:
    """Both bandsize readings for one matrix of dimension n."""

    global_count: int
    per_row_mean: float
    n: int

    @property
    def global_fraction(self):
        return self.global_count / (self.n * self.n)

    @property
    def per_row_fraction(self):
        return self.per_row_mean / self.n


def bandsize(u, eta=DEFAULT_ETA):
    """Compute both eta-bandsize readings of a square matrix."""
    if not (0 < eta < 1):
        raise ValueError(f"eta must lie strictly inside (0, 1), got {eta}")
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    n = u.shape[0]
    power = u.real**2 + u.imag**2

    flat = np.sort(power, axis=None)[::-1]
    global_count = int(np.searchsorted(np.cumsum(flat), (1 - eta) * n) + 1)
    global_count = min(global_count, flat.size)

    rows = np.sort(power, axis=1)[:, ::-1]
    cum = np.cumsum(rows, axis=1)
    need = (1 - eta) * power.sum(axis=1)
    counts = [int(np.searchsorted(cum[i], need[i]) + 1) for i in range(n)]
    per_row = float(np.mean(np.minimum(counts, n)))
    return Bandsize(global_count, per_row, n)


def error_map(u_hat, u):
    """Elementwise |u_hat - u|; its squared Frobenius norm is 2N times the
    mean square error cost."""
    u_hat = np.asarray(u_hat)
    u = np.asarray(u)
    if u_hat.shape != u.shape:
        raise ValueError(f"dimension mismatch: {u_hat.shape} vs {u.shape}")
    return np.abs(u_hat - u)


def checkerboard(spec, params=None, quantity="alpha"):
    """Per-MZI quantity laid out on the (top index, layer) grid.

    Rows are top indices 1..N-1, columns are layers; cells without an MZI
    hold NaN. Quantities: "alpha" and "avg-r" need only the spec (alpha per
    the initialization rule of the architecture); "theta" (folded to
    [0, pi]) and "xi" (Haar phase of the current theta) need params.
    """
    if quantity not in CHECKERBOARD_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    if quantity in ("theta", "xi") and params is None:
        raise ValueError(f"quantity {quantity!r} requires phases")
    if quantity in ("xi", "alpha", "avg-r"):
        alpha = initialization_alpha(spec).astype(np.float64)
    grid = np.full((spec.n - 1, len(spec.layers)), np.nan)
    for g, (layer_idx, top) in enumerate(spec.mzi_positions()):
        if quantity == "alpha":
            val = alpha[g]
        elif quantity == "avg-r":
            val = 1.0 / (alpha[g] + 1.0)
        else:
            theta = canonicalize_theta(params.theta[g])
            if quantity == "theta":
                val = theta
            else:
                val = np.cos(theta / 2) ** (2 * alpha[g])
        grid[top - 1, layer_idx - 1] = val
    return grid


def save_grid_csv(path, grid):
    """Write a checkerboard grid as CSV with a layer_0..layer_{L-1} header;
    NaN cells are left empty."""
    grid = np.asarray(grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"layer_{j}" for j in range(grid.shape[1])])
        for row in grid:
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def save_fields_csv(path, fields):
    """Write a per-layer field-magnitude array (layers x n) as CSV."""
    fields = np.asarray(fields)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"waveguide_{j + 1}" for j in range(fields.shape[1])])
        for row in fields:
            w.writerow([repr(float(v)) for v in row])
