"""Sensitivity indices, Haar phase distributions, and mesh initialization.

For a mesh implementing Haar-random unitaries, the internal phase theta of
each MZI follows a distribution set by that MZI's sensitivity index

    alpha = |I| + |O| - N - 1,

where I and O are the sets of input/output waveguides reachable from the
MZI. The theta density (on [0, pi]) is

    p_alpha(theta) = alpha sin(theta/2) cos(theta/2)^(2 alpha - 1),

equivalently the transmissivity t = cos^2(theta/2) has density
``alpha t^(alpha-1)``. Its CDF coordinate, the Haar phase

    xi = t^alpha,

is uniform on [0, 1] exactly when the mesh is Haar random, so drawing xi
uniformly and setting ``theta = 2 arccos(xi^(1/2 alpha))`` ("Haar
initialization") reproduces the Haar measure on the mesh. External phases
phi and gamma are uniform on [0, 2 pi) independently of all this.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .mesh import PhaseParams, rectangular_spec

__all__ = [
    "SensitivityMap",
    "sensitivity_reachable",
    "sensitivity_closed_form_rect",
    "initialization_alpha",
    "haar_pdf",
    "haar_phase_from_theta",
    "theta_from_haar_phase",
    "haar_initialize",
    "uniform_initialize",
    "average_transmissivity",
    "average_reflectivity",
    "theta_std",
    "canonicalize_theta",
    "periodic_haar_phase",
]


@dataclass(frozen=True)
class SensitivityMap:
    """Sensitivity index per MZI, in the binding layer-major order."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.int64))


def _reach_counts(n, layers, slices, mzi_count):
    """|I| and |O| per MZI by bitset reachability sweeps through the layers."""
    i_count = np.zeros(mzi_count, dtype=np.int64)
    reach = [1 << w for w in range(n)]
    for layer, sl in zip(layers, slices):
        if sl is None:
            new = [0] * n
            for src, dst in enumerate(layer.dest):
                new[dst - 1] = reach[src]
            reach = new
        else:
            a, _ = sl
            for k, t in enumerate(layer.tops):
                merged = reach[t - 1] | reach[t]
                i_count[a + k] = merged.bit_count()
                reach[t - 1] = reach[t] = merged

    o_count = np.zeros(mzi_count, dtype=np.int64)
    reach = [1 << w for w in range(n)]
    for layer, sl in zip(reversed(layers), reversed(slices)):
        if sl is None:
            reach = [reach[d - 1] for d in layer.dest]
        else:
            a, _ = sl
            for k, t in enumerate(layer.tops):
                merged = reach[t - 1] | reach[t]
                o_count[a + k] = merged.bit_count()
                reach[t - 1] = reach[t] = merged
    return i_count, o_count


def sensitivity_reachable(spec):
    """Sensitivity map from reachability: alpha = |I| + |O| - N - 1, floored at 1.

    Works for any architecture; fixed permutations simply relay reachability
    through their mapping. For the square rectangular and triangular meshes
    this reproduces the known closed forms.
    """
    i_count, o_count = _reach_counts(spec.n, spec.layers, spec.layer_slices(),
                                     spec.mzi_count)
    alpha = i_count + o_count - spec.n - 1
    return SensitivityMap(np.maximum(alpha, 1))


def sensitivity_closed_form_rect(n):
    """Closed-form sensitivity map of the square rectangular mesh.

    Uses the diagonal lattice basis x = (w + l)/2, y = (l - w)/2 + floor(N/2)
    (w = top index, l = layer). With the diagonal length

        d(x) = 2x - 1        for x <= floor(N/2), else 2(N - x)

    and the position sequence along a diagonal

        s_x[y] = 2(floor(N/2) - y) + 1   for y <= floor(N/2),
                 2(y - floor(N/2))       otherwise,

    the index is alpha = d(x) + 1 - s_x[y]. Equals the reachable-set map on
    rectangular_spec(n, n) MZI for MZI.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    spec = rectangular_spec(n, n)
    half = n // 2
    alpha = []
    for l, w in spec.mzi_positions():
        x = (w + l) // 2
        y = (l - w) // 2 + half
        d = 2 * x - 1 if x <= half else 2 * (n - x)
        s = 2 * (half - y) + 1 if y <= half else 2 * (y - half)
        alpha.append(d + 1 - s)
    return SensitivityMap(np.asarray(alpha))


def _block_runs(spec):
    """Maximal runs of consecutive MZI columns, as (layers, slices) pairs."""
    runs = []
    current = []
    for layer, sl in zip(spec.layers, spec.layer_slices()):
        if sl is None:
            if current:
                runs.append(current)
                current = []
        else:
            current.append((layer, sl))
    if current:
        runs.append(current)
    return runs


def initialization_alpha(spec):
    """The sensitivity rule used by :func:`haar_initialize`.

    Permuting meshes are initialized block by block: each tunable block is
    treated as an independent mesh, with the port count in the alpha formula
    replaced by the block's column count (alpha = |I| + |O| - cols - 1,
    floored at 1, reachability restricted to the block). All other
    architectures use whole-mesh reachability.
    """
    if spec.arch != "permuting":
        return sensitivity_reachable(spec).alpha
    alpha = np.empty(spec.mzi_count, dtype=np.int64)
    for run in _block_runs(spec):
        layers = [layer for layer, _ in run]
        cols = len(layers)
        count = sum(len(l.tops) for l in layers)
        local_slices = []
        pos = 0
        for l in layers:
            local_slices.append((pos, pos + len(l.tops)))
            pos += len(l.tops)
        i_cnt, o_cnt = _reach_counts(spec.n, layers, local_slices, count)
        block_alpha = np.maximum(i_cnt + o_cnt - cols - 1, 1)
        start = run[0][1][0]
        alpha[start:start + count] = block_alpha
    return alpha


# --- Haar phase math ----------------------------------------------------

def haar_pdf(alpha, theta):
    """Density of theta on [0, pi] for sensitivity index alpha.

    ``alpha sin(theta/2) cos(theta/2)^(2 alpha - 1)``; integrates to one over
    theta in [0, pi]. Larger alpha pushes mass toward the cross state
    (theta = 0).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > np.pi):
        raise ValueError("theta must lie in [0, pi]")
    if np.any(np.asarray(alpha) < 1):
        raise ValueError("alpha must be >= 1")
    half = theta / 2
    out = alpha * np.sin(half) * np.cos(half) ** (2 * np.asarray(alpha) - 1)
    return out if out.ndim else float(out)


def haar_phase_from_theta(alpha, theta):
    """Haar phase xi = cos(theta/2)^(2 alpha) = t^alpha, in [0, 1]."""
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > np.pi):
        raise ValueError("theta must lie in [0, pi]")
    out = np.cos(theta / 2) ** (2 * np.asarray(alpha, dtype=np.float64))
    return out if out.ndim else float(out)


def theta_from_haar_phase(alpha, xi):
    """Inverse map theta = 2 arccos(xi^(1/(2 alpha))), monotone decreasing in xi."""
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(xi < 0) or np.any(xi > 1):
        raise ValueError("xi must lie in [0, 1]")
    out = 2 * np.arccos(xi ** (1 / (2 * np.asarray(alpha, dtype=np.float64))))
    return out if out.ndim else float(out)


def average_transmissivity(alpha):
    """Mean transmissivity alpha/(alpha+1) under the Haar theta distribution."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 1):
        raise ValueError("alpha must be >= 1")
    out = alpha / (alpha + 1)
    return out if out.ndim else float(out)


def average_reflectivity(alpha):
    """Mean reflectivity 1/(alpha+1) under the Haar theta distribution."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 1):
        raise ValueError("alpha must be >= 1")
    out = 1 / (alpha + 1)
    return out if out.ndim else float(out)


def theta_std(alpha):
    """Standard deviation of theta under :func:`haar_pdf`, by adaptive quadrature.

    Strictly decreasing in alpha: more sensitive MZIs tolerate less phase
    spread. Absolute quadrature tolerance 1e-10.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    m1, _ = integrate.quad(lambda th: th * haar_pdf(alpha, th), 0, np.pi,
                           epsabs=1e-10, limit=200)
    m2, _ = integrate.quad(lambda th: th * th * haar_pdf(alpha, th), 0, np.pi,
                           epsabs=1e-10, limit=200)
    return float(np.sqrt(max(m2 - m1 * m1, 0.0)))


def canonicalize_theta(theta):
    """Fold an unconstrained theta into its absolute value in [0, pi].

    Reduces mod 2 pi, then reflects: theta -> 2 pi - theta for theta > pi.
    This leaves the transmissivity unchanged.
    """
    theta = np.mod(np.asarray(theta, dtype=np.float64), 2 * np.pi)
    out = np.where(theta > np.pi, 2 * np.pi - theta, theta)
    return out if out.ndim else float(out)


def periodic_haar_phase(xi_tilde):
    """Fold a periodic Haar phase (period 2) into [0, 1] by the same reflection."""
    xi = np.mod(np.asarray(xi_tilde, dtype=np.float64), 2.0)
    out = np.where(xi > 1.0, 2.0 - xi, xi)
    return out if out.ndim else float(out)


# --- initialization -----------------------------------------------------

def haar_initialize(spec, rng):
    """Phases sampled so the mesh implements a Haar-random unitary.

    Per MZI (binding order): xi ~ U(0,1), theta = 2 arccos(xi^(1/2 alpha))
    with alpha from :func:`initialization_alpha`. Then phi ~ U[0, 2 pi) per
    MZI and gamma ~ U[0, 2 pi) per input, in that draw order.
    """
    alpha = initialization_alpha(spec)
    xi = rng.random(spec.mzi_count)
    theta = 2 * np.arccos(xi ** (1 / (2 * alpha.astype(np.float64))))
    phi = rng.uniform(0, 2 * np.pi, size=spec.mzi_count)
    gamma = rng.uniform(0, 2 * np.pi, size=spec.n)
    return PhaseParams(theta, phi, gamma)


def uniform_initialize(spec, rng):
    """Naive phases: theta, phi, gamma ~ U[0, 2 pi), theta folded to [0, pi].

    The baseline initialization that biases large meshes toward banded
    unitaries (light random-walks instead of spreading).
    """
    theta = canonicalize_theta(rng.uniform(0, 2 * np.pi, size=spec.mzi_count))
    phi = rng.uniform(0, 2 * np.pi, size=spec.mzi_count)
    gamma = rng.uniform(0, 2 * np.pi, size=spec.n)
    return PhaseParams(np.asarray(theta), phi, gamma)
