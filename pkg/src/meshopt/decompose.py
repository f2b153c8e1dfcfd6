"""Rectangular (Clements-style) decomposition of a unitary into mesh phases.

Writes any N-by-N unitary as the square rectangular mesh product

    U = T_N ... T_2 T_1 D(gamma),

i.e. phases for ``rectangular_spec(n, n)`` with perfect beamsplitters. The
two-sided nulling scheme of Clements et al. eliminates the lower-left
triangle along anti-diagonals, alternating column mixes (applied to the
input side) and row mixes (output side). The leftover single-mode phases are
then commuted through the MZI factors onto the input phase screen using

    diag(e^{ia}, e^{ib}) . u(theta, phi) = u(theta, phi + a - b) . e^{ib} I

so every factor lands in the mesh's own (output-phase) MZI convention.
"""

import numpy as np

from .core import is_unitary
from .mesh import PhaseParams, rectangular_spec

__all__ = ["clements_decompose"]


def _null_right(a, b):
    """(theta, phi) so that sin(t/2) e^{-i phi} a + cos(t/2) b = 0."""
    if a == 0 and b == 0:
        return np.pi, 0.0
    theta = 2 * np.arctan2(abs(b), abs(a))
    if a == 0 or b == 0:
        return theta, 0.0
    return theta, float(np.angle(-a / b))


def _null_left(a, b):
    """(theta, phi) so that cos(t/2) e^{i phi} a - sin(t/2) b = 0."""
    if a == 0 and b == 0:
        return np.pi, 0.0
    theta = 2 * np.arctan2(abs(a), abs(b))
    if a == 0 or b == 0:
        return theta, 0.0
    return theta, float(np.angle(b / a))


def _apply_right(work, col, theta, phi):
    """work <- work . (M(theta) diag(e^{i phi}, 1))^dagger on columns (col, col+1)."""
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    k = -1j * np.exp(-1j * theta / 2)
    cj = work[:, col - 1].copy()
    cj1 = work[:, col]
    work[:, col - 1] = k * (s * np.exp(-1j * phi) * cj + c * cj1)
    work[:, col] = k * (c * np.exp(-1j * phi) * cj - s * cj1)


def _apply_left(work, top, theta, phi):
    """work <- (M(theta) diag(e^{i phi}, 1)) . work on rows (top, top+1)."""
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    k = 1j * np.exp(1j * theta / 2)
    rt = work[top - 1, :].copy()
    rb = work[top, :]
    work[top - 1, :] = k * (s * np.exp(1j * phi) * rt + c * rb)
    work[top, :] = k * (c * np.exp(1j * phi) * rt - s * rb)


def clements_decompose(u, tol=1e-10):
    """Decompose a unitary into rectangular-mesh phases.

    Returns PhaseParams for ``rectangular_spec(n, n)`` with theta in [0, pi]
    and phi, gamma in [0, 2 pi); reconstructing through ``mesh_unitary``
    reproduces ``u`` to a few ulps times n^2.

    Raises ValueError if ``u`` is not unitary within ``tol``.
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    n = u.shape[0]
    if n < 2:
        raise ValueError("decomposition needs n >= 2")
    if not is_unitary(u, tol):
        raise ValueError(f"matrix is not unitary within tol={tol}")

    work = u.copy()
    left_ops = []   # (top, theta, phi), chronological
    right_ops = []
    for d in range(1, n):
        if d % 2 == 1:
            for j in range(d):
                row, col = n - j, d - j
                theta, phi = _null_right(work[row - 1, col - 1], work[row - 1, col])
                _apply_right(work, col, theta, phi)
                right_ops.append((col, theta, phi))
        else:
            for j in range(1, d + 1):
                row, col = n - d + j, j
                theta, phi = _null_left(work[row - 2, col - 1], work[row - 1, col - 1])
                _apply_left(work, row - 1, theta, phi)
                left_ops.append((row - 1, theta, phi))

    off = work - np.diag(np.diagonal(work))
    if np.max(np.abs(off)) > 1e-8:
        raise AssertionError("nulling did not reach a diagonal matrix")

    # Normal form: with the nulling ops L_i (rows) and R_i (columns),
    #   U = L_1' ... L_m' . D_c . R_p ... R_1
    # where each primed factor expands into a pure mixer M(theta) plus
    # single-mode phases. Sweep a pending phase screen psi left to right:
    # absorbing a diagonal adds angles; passing an MZI at top t emits
    # u(theta, psi[t-1] - psi[t]) and equalizes the pair to psi[t].
    psi = np.zeros(n)
    emitted = []  # (top, theta, phi) in product order, leftmost first

    def emit(top, theta):
        emitted.append((top, theta, psi[top - 1] - psi[top]))
        psi[top - 1] = psi[top]

    for top, theta, phi in left_ops:
        # (M(theta) diag(e^{i phi},1))^dagger = diag-phases . M(theta)
        psi[top - 1] += np.pi - theta - phi
        psi[top] += np.pi - theta
        emit(top, theta)
    psi += np.angle(np.diagonal(work))
    for top, theta, phi in reversed(right_ops):
        emit(top, theta)
        psi[top - 1] += phi

    # Pack factors into mesh columns: reversed product order is application
    # order; each MZI goes in the earliest parity-matching free column.
    next_free = np.ones(n + 1, dtype=np.int64)
    slots = {}
    for top, theta, phi in reversed(emitted):
        col = int(max(next_free[top - 1], next_free[top]))
        if col % 2 != top % 2:
            col += 1
        if col > n:
            raise AssertionError("factor sequence does not fit the square mesh")
        slots[(col, top)] = (theta, phi)
        next_free[top - 1] = next_free[top] = col + 1

    spec = rectangular_spec(n, n)
    positions = spec.mzi_positions()
    if set(slots) != set(positions):
        raise AssertionError("factor sequence does not cover the square mesh")
    theta_arr = np.array([slots[p][0] for p in positions])
    phi_arr = np.mod([slots[p][1] for p in positions], 2 * np.pi)
    gamma = np.mod(psi, 2 * np.pi)
    return PhaseParams(theta_arr, np.asarray(phi_arr), gamma)
