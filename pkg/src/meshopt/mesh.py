"""Mesh topologies, MZI physics, and field propagation.

A mesh is an ordered sequence of layers acting on ``n`` waveguides. A layer
is either a column of non-overlapping Mach-Zehnder interferometers (MZIs) or
a fixed waveguide permutation. Waveguides and MZI top indices are 1-based: an
MZI with top index ``t`` couples waveguides ``t`` and ``t+1``.

Each MZI applies the 2x2 unitary

    u(theta, phi) = R_phi . B . R_theta . B

with upper phase shifts ``R_psi = diag(e^{i psi}, 1)`` and 50:50 beamsplitter
``B = [[1, i], [i, 1]] / sqrt(2)``, which works out to

    u = i e^{i theta/2} [[e^{i phi} sin(theta/2), e^{i phi} cos(theta/2)],
                         [          cos(theta/2),          -sin(theta/2)]].

Power crossing to the other waveguide is the transmissivity
``t = cos^2(theta/2)``; power staying is the reflectivity ``r = 1 - t``.
``theta = 0`` is the cross state, ``theta = pi`` the bar state.

Fabrication error is modeled as a split-ratio displacement ``eps`` per
beamsplitter, replacing B by

    B_eps = [[sqrt(1+eps), i sqrt(1-eps)], [i sqrt(1-eps), sqrt(1+eps)]] / sqrt(2),

still unitary for |eps| <= 1. With equal displacements on both splitters the
realizable transmissivity shrinks to ``t_eps = t (1 - eps^2)``.

The whole mesh applies the input phase screen ``D(gamma) = diag(e^{i gamma_w})``
first, then every layer in order. Per-MZI parameter arrays (theta, phi, eps)
follow one binding order: layer-major, then ascending top index.
"""

from dataclasses import dataclass

import json
import math

import numpy as np

__all__ = [
    "MziColumn",
    "FixedPermutation",
    "MeshSpec",
    "PhaseParams",
    "BeamsplitterErrors",
    "mzi_entries",
    "mzi_entries_dtheta",
    "mzi_matrix",
    "transmissivity",
    "reflectivity",
    "transmissivity_with_error",
    "rectangular_spec",
    "triangular_spec",
    "permuting_spec",
    "default_block_order",
    "butterfly_permutation",
    "forward",
    "forward_adjoint",
    "mesh_unitary",
    "propagate_fields",
    "mesh_to_json",
    "mesh_from_json",
    "save_mesh",
    "load_mesh",
    "errors_to_json",
    "errors_from_json",
    "save_errors",
    "load_errors",
]


# --- spec types ---------------------------------------------------------

@dataclass(frozen=True)
class MziColumn:
    """One vertical column of parallel MZIs, given by their 1-based top indices."""

    tops: tuple

    def __post_init__(self):
        tops = tuple(sorted(int(t) for t in self.tops))
        object.__setattr__(self, "tops", tops)
        for a, b in zip(tops, tops[1:]):
            if b - a < 2:
                raise ValueError(f"overlapping MZIs in column: tops {a} and {b}")


@dataclass(frozen=True)
class FixedPermutation:
    """Fixed waveguide routing: waveguide ``w`` (1-based) moves to ``dest[w-1]``."""

    dest: tuple

    def __post_init__(self):
        dest = tuple(int(d) for d in self.dest)
        object.__setattr__(self, "dest", dest)
        if sorted(dest) != list(range(1, len(dest) + 1)):
            raise ValueError("permutation mapping is not a bijection")


@dataclass(frozen=True)
class MeshSpec:
    """Architecture of a mesh: waveguide count plus ordered layers.

    ``arch`` tags how the spec was built ("rectangular", "triangular" or
    "permuting"); it selects the sensitivity-index rule used for Haar
    initialization. ``block_order`` records the permutation-layer order of a
    permuting mesh and is None otherwise.
    """

    n: int
    layers: tuple
    arch: str
    block_order: tuple = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"mesh needs at least 2 waveguides, got {self.n}")
        for layer in self.layers:
            if isinstance(layer, MziColumn):
                if layer.tops and not (1 <= layer.tops[0] and layer.tops[-1] <= self.n - 1):
                    raise ValueError(f"top index out of range in {layer}")
            elif isinstance(layer, FixedPermutation):
                if len(layer.dest) != self.n:
                    raise ValueError("permutation size does not match waveguide count")
            else:
                raise TypeError(f"unknown layer type {type(layer)}")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def mzi_count(self):
        return sum(len(l.tops) for l in self.layers if isinstance(l, MziColumn))

    def mzi_positions(self):
        """(layer index 1-based, top index) for every MZI, in binding order."""
        out = []
        for i, layer in enumerate(self.layers, start=1):
            if isinstance(layer, MziColumn):
                out.extend((i, t) for t in layer.tops)
        return out

    def layer_slices(self):
        """Per-layer (start, stop) into the global MZI arrays; None for permutations."""
        out = []
        pos = 0
        for layer in self.layers:
            if isinstance(layer, MziColumn):
                out.append((pos, pos + len(layer.tops)))
                pos += len(layer.tops)
            else:
                out.append(None)
        return out


@dataclass
class PhaseParams:
    """Trainable phases of a mesh: theta/phi per MZI, gamma per input waveguide.

    Values are stored unconstrained (canonicalization to [0, pi] x [0, 2pi)
    is an export-time concern, see :mod:`meshopt.haar`).
    """

    theta: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        if self.theta.shape != self.phi.shape:
            raise ValueError("theta and phi must have one value per MZI each")

    @classmethod
    def zeros(cls, spec):
        m = spec.mzi_count
        return cls(np.zeros(m), np.zeros(m), np.zeros(spec.n))

    def copy(self):
        return PhaseParams(self.theta.copy(), self.phi.copy(), self.gamma.copy())

    def check_shape(self, spec):
        if self.theta.size != spec.mzi_count or self.gamma.size != spec.n:
            raise ValueError(
                f"params sized for {self.theta.size} MZIs / {self.gamma.size} inputs, "
                f"spec has {spec.mzi_count} / {spec.n}")


@dataclass
class BeamsplitterErrors:
    """Split-ratio displacements, two per MZI (first and second beamsplitter)."""

    eps1: np.ndarray
    eps2: np.ndarray

    def __post_init__(self):
        self.eps1 = np.asarray(self.eps1, dtype=np.float64)
        self.eps2 = np.asarray(self.eps2, dtype=np.float64)
        if np.any(np.abs(self.eps1) > 1) or np.any(np.abs(self.eps2) > 1):
            raise ValueError("|eps| <= 1 required for a physical beamsplitter")

    @classmethod
    def none(cls, spec):
        m = spec.mzi_count
        return cls(np.zeros(m), np.zeros(m))

    @classmethod
    def gaussian(cls, spec, sigma, rng):
        """Draw eps ~ N(0, sigma^2) per MZI, identical on both beamsplitters.

        Draws are clipped to [-1, 1] to keep the splitter physical; at the
        sigma <= 0.1 scales of interest clipping is astronomically rare.
        """
        eps = np.clip(rng.normal(0.0, sigma, size=spec.mzi_count), -1.0, 1.0)
        return cls(eps, eps.copy())

    def check_shape(self, spec):
        if self.eps1.size != spec.mzi_count or self.eps2.size != spec.mzi_count:
            raise ValueError("error arrays do not match the spec's MZI count")


# --- single-MZI algebra -------------------------------------------------

def mzi_entries(theta, phi, eps1, eps2):
    """Vectorized 2x2 MZI entries (u11, u12, u21, u22) for parameter arrays.

    With rho_i = sqrt((1+eps_i)/2) and tau_i = sqrt((1-eps_i)/2):

        u11 = e^{i phi} (rho1 rho2 e^{i theta} - tau1 tau2)
        u12 = i e^{i phi} (tau1 rho2 e^{i theta} + rho1 tau2)
        u21 = i (rho1 tau2 e^{i theta} + tau1 rho2)
        u22 = rho1 rho2 - tau1 tau2 e^{i theta}
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    eps1 = np.asarray(eps1, dtype=np.float64)
    eps2 = np.asarray(eps2, dtype=np.float64)
    if np.any(np.abs(eps1) > 1) or np.any(np.abs(eps2) > 1):
        raise ValueError("|eps| <= 1 required")
    rho1, tau1 = np.sqrt((1 + eps1) / 2), np.sqrt((1 - eps1) / 2)
    rho2, tau2 = np.sqrt((1 + eps2) / 2), np.sqrt((1 - eps2) / 2)
    eith = np.exp(1j * theta)
    eiph = np.exp(1j * phi)
    u11 = eiph * (rho1 * rho2 * eith - tau1 * tau2)
    u12 = 1j * eiph * (tau1 * rho2 * eith + rho1 * tau2)
    u21 = 1j * (rho1 * tau2 * eith + tau1 * rho2)
    u22 = rho1 * rho2 - tau1 * tau2 * eith
    return u11, u12, u21, u22


def mzi_entries_dtheta(theta, phi, eps1, eps2):
    """Entrywise derivative of :func:`mzi_entries` with respect to theta."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    rho1, tau1 = np.sqrt((1 + np.asarray(eps1)) / 2), np.sqrt((1 - np.asarray(eps1)) / 2)
    rho2, tau2 = np.sqrt((1 + np.asarray(eps2)) / 2), np.sqrt((1 - np.asarray(eps2)) / 2)
    deith = 1j * np.exp(1j * theta)
    eiph = np.exp(1j * phi)
    d11 = eiph * rho1 * rho2 * deith
    d12 = 1j * eiph * tau1 * rho2 * deith
    d21 = 1j * rho1 * tau2 * deith
    d22 = -tau1 * tau2 * deith
    return d11, d12, d21, d22


def mzi_matrix(theta, phi, eps1=0.0, eps2=0.0):
    """2x2 transfer matrix of one MZI, including beamsplitter errors."""
    u11, u12, u21, u22 = mzi_entries(theta, phi, eps1, eps2)
    return np.array([[u11, u12], [u21, u22]], dtype=np.complex128)


def transmissivity(theta):
    """Cross-port power fraction t = cos^2(theta/2)."""
    return np.cos(np.asarray(theta, dtype=np.float64) / 2) ** 2


def reflectivity(theta):
    """Same-port power fraction r = sin^2(theta/2) = 1 - t."""
    return np.sin(np.asarray(theta, dtype=np.float64) / 2) ** 2


def transmissivity_with_error(theta, eps):
    """Realizable transmissivity t_eps = t (1 - eps^2) for equal splitter errors."""
    eps = np.asarray(eps, dtype=np.float64)
    if np.any(np.abs(eps) > 1):
        raise ValueError("|eps| <= 1 required")
    return transmissivity(theta) * (1 - eps**2)


# --- architectures ------------------------------------------------------

def _parity_tops(n, parity):
    return tuple(t for t in range(1, n) if t % 2 == parity)


def rectangular_spec(n, l=None):
    """Rectangular mesh with ``l`` MZI columns on ``n`` waveguides.

    Column ``l`` holds the tops of matching parity (odd columns couple
    (1,2), (3,4), ...; even columns couple (2,3), (4,5), ...). ``l = n`` is
    the standard universal mesh with n(n-1)/2 MZIs; ``l > n`` adds redundant
    tunable columns.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if l is None:
        l = n
    if l < 1:
        raise ValueError(f"need at least one layer, got {l}")
    layers = tuple(MziColumn(_parity_tops(n, li % 2)) for li in range(1, l + 1))
    return MeshSpec(n=n, layers=layers, arch="rectangular")


def triangular_spec(n):
    """Triangular mesh on ``n`` waveguides, drawn as 2n-3 vertical layers.

    The diagonal cascade structure: diagonal ``m`` (m = n..2) carries MZIs at
    waveguides n-1 down to n-m+1, and the MZI of diagonal m at waveguide w
    sits in vertical layer 2(n-m) + (n-w). Same n(n-1)/2 MZI count as the
    square rectangular mesh.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    per_layer = {}
    for m in range(n, 1, -1):
        for w in range(n - 1, n - m, -1):
            per_layer.setdefault(2 * (n - m) + (n - w), []).append(w)
    layers = tuple(MziColumn(tuple(sorted(per_layer[li])))
                   for li in range(1, 2 * n - 2))
    return MeshSpec(n=n, layers=layers, arch="triangular")


def butterfly_permutation(n, k):
    """Butterfly swap moving every waveguide by exactly 2^k.

    0-based wires pair up as i <-> i XOR 2^k: consecutive blocks of 2^{k+1}
    waveguides exchange their two halves. An involution, so it is its own
    inverse.
    """
    step = 1 << k
    if 2 * step > n:
        raise ValueError(f"butterfly stage k={k} does not fit n={n}")
    return FixedPermutation(tuple((i ^ step) + 1 for i in range(n)))


def default_block_order(k_blocks):
    """Permutation-layer order placing the widest butterflies mid-mesh.

    Even stages in ascending order, then odd stages descending, e.g.
    [2, 4, 6, 5, 3, 1] for 7 blocks.
    """
    stages = range(1, k_blocks)
    return tuple([k for k in stages if k % 2 == 0] +
                 [k for k in reversed(stages) if k % 2 == 1])


def permuting_spec(n, block_order=None):
    """Permuting rectangular mesh: K = log2(n) rectangular blocks separated
    by fixed butterfly permutations.

    Blocks get ceil(n/K) consecutive rectangular columns each (global column
    parity runs straight through), with the last block truncated so the
    tunable column total stays exactly n. ``block_order[j]`` is the butterfly
    stage k applied after block j+1; it must be a permutation of 1..K-1.
    """
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"permuting mesh needs a power-of-two size, got {n}")
    k_blocks = n.bit_length() - 1
    if block_order is None:
        block_order = default_block_order(k_blocks)
    block_order = tuple(int(k) for k in block_order)
    if sorted(block_order) != list(range(1, k_blocks)):
        raise ValueError(
            f"block order must be a permutation of 1..{k_blocks - 1}, got {block_order}")
    cols_per_block = math.ceil(n / k_blocks) if k_blocks else n
    layers = []
    col = 1
    for b in range(k_blocks):
        stop = n if b == k_blocks - 1 else min(col + cols_per_block - 1, n)
        while col <= stop:
            layers.append(MziColumn(_parity_tops(n, col % 2)))
            col += 1
        if b < k_blocks - 1:
            layers.append(butterfly_permutation(n, block_order[b]))
    return MeshSpec(n=n, layers=tuple(layers), arch="permuting",
                    block_order=block_order)


# --- propagation --------------------------------------------------------

def _compiled_layers(spec, params, errors):
    """Lower a (spec, params, errors) triple to per-layer numpy apply data."""
    params.check_shape(spec)
    if errors is None:
        errors = BeamsplitterErrors.none(spec)
    errors.check_shape(spec)
    ops = []
    for layer, sl in zip(spec.layers, spec.layer_slices()):
        if sl is None:
            dest0 = np.asarray(layer.dest, dtype=np.intp) - 1
            take_fwd = np.empty_like(dest0)
            take_fwd[dest0] = np.arange(dest0.size)
            ops.append(("perm", take_fwd, dest0))
        else:
            a, b = sl
            tops0 = np.asarray(layer.tops, dtype=np.intp) - 1
            ent = mzi_entries(params.theta[a:b], params.phi[a:b],
                              errors.eps1[a:b], errors.eps2[a:b])
            ops.append(("mzi", tops0, (a, b), ent))
    return ops


def _apply_column(x, tops0, ent):
    u11, u12, u21, u22 = ent
    xt = x[tops0]
    xb = x[tops0 + 1]
    x[tops0] = u11[:, None] * xt + u12[:, None] * xb
    x[tops0 + 1] = u21[:, None] * xt + u22[:, None] * xb


def _apply_column_adjoint(x, tops0, ent):
    u11, u12, u21, u22 = ent
    xt = x[tops0]
    xb = x[tops0 + 1]
    x[tops0] = u11.conj()[:, None] * xt + u21.conj()[:, None] * xb
    x[tops0 + 1] = u12.conj()[:, None] * xt + u22.conj()[:, None] * xb


def _as_batch(spec, x):
    x = np.asarray(x, dtype=np.complex128)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != spec.n:
        raise ValueError(f"input shape {x.shape} does not match n={spec.n}")
    return x.copy(), squeeze


def forward(spec, params, errors, x):
    """Propagate a field batch (n-by-b) through the mesh.

    Applies the input phase screen D(gamma) first, then each layer in order.
    Accepts a single vector as well; batch columns are independent.
    """
    y, squeeze = _as_batch(spec, x)
    y *= np.exp(1j * params.gamma)[:, None]
    for op in _compiled_layers(spec, params, errors):
        if op[0] == "perm":
            y = y[op[1]]
        else:
            _apply_column(y, op[1], op[3])
    return y[:, 0] if squeeze else y


def forward_adjoint(spec, params, errors, x):
    """Apply the inverse (adjoint) of the mesh unitary to a field batch."""
    y, squeeze = _as_batch(spec, x)
    for op in reversed(_compiled_layers(spec, params, errors)):
        if op[0] == "perm":
            y = y[op[2]]
        else:
            _apply_column_adjoint(y, op[1], op[3])
    y *= np.exp(-1j * params.gamma)[:, None]
    return y[:, 0] if squeeze else y


def mesh_unitary(spec, params, errors=None):
    """The n-by-n unitary implemented by the mesh (forward map of identity)."""
    return forward(spec, params, errors, np.eye(spec.n, dtype=np.complex128))


def propagate_fields(spec, params, input_port, errors=None):
    """Field magnitudes |amplitude| per waveguide after every layer.

    Light of unit power enters ``input_port`` (1-based). Returns a real
    (layers x n) array; each row's squared entries sum to one (the mesh is
    lossless).
    """
    if not (1 <= input_port <= spec.n):
        raise IndexError(f"input port {input_port} outside 1..{spec.n}")
    y = np.zeros((spec.n, 1), dtype=np.complex128)
    y[input_port - 1, 0] = 1.0
    y *= np.exp(1j * params.gamma)[:, None]
    rows = []
    for op in _compiled_layers(spec, params, errors):
        if op[0] == "perm":
            y = y[op[1]]
        else:
            _apply_column(y, op[1], op[3])
        rows.append(np.abs(y[:, 0]))
    return np.array(rows)


# --- serialization ------------------------------------------------------

def mesh_to_json(spec, params=None):
    """Encode a spec (and optionally its phases) as a JSON-ready dict.

    Layers are listed in order as {"type": "mzi", "tops": [...]} or
    {"type": "perm", "dest": [...]}, with 1-based indices. Per-MZI arrays
    follow the binding layer-major / ascending-top order.
    """
    obj = {
        "arch": spec.arch,
        "n": spec.n,
        "layers": [
            {"type": "mzi", "tops": list(l.tops)} if isinstance(l, MziColumn)
            else {"type": "perm", "dest": list(l.dest)}
            for l in spec.layers
        ],
    }
    if spec.block_order is not None:
        obj["block_order"] = list(spec.block_order)
    if params is not None:
        params.check_shape(spec)
        obj["theta"] = params.theta.tolist()
        obj["phi"] = params.phi.tolist()
        obj["gamma"] = params.gamma.tolist()
    return obj


def mesh_from_json(obj):
    """Decode :func:`mesh_to_json` output into (MeshSpec, PhaseParams or None)."""
    layers = []
    for l in obj["layers"]:
        if l["type"] == "mzi":
            layers.append(MziColumn(tuple(l["tops"])))
        elif l["type"] == "perm":
            layers.append(FixedPermutation(tuple(l["dest"])))
        else:
            raise ValueError(f"unknown layer type {l['type']!r}")
    block_order = tuple(obj["block_order"]) if "block_order" in obj else None
    spec = MeshSpec(n=int(obj["n"]), layers=tuple(layers), arch=obj["arch"],
                    block_order=block_order)
    params = None
    if "theta" in obj:
        params = PhaseParams(np.asarray(obj["theta"]), np.asarray(obj["phi"]),
                             np.asarray(obj["gamma"]))
        params.check_shape(spec)
    return spec, params


def save_mesh(path, spec, params=None):
    with open(path, "w") as fh:
        json.dump(mesh_to_json(spec, params), fh)


def load_mesh(path):
    with open(path) as fh:
        return mesh_from_json(json.load(fh))


def errors_to_json(errors):
    return {"eps1": errors.eps1.tolist(), "eps2": errors.eps2.tolist()}


def errors_from_json(obj):
    return BeamsplitterErrors(np.asarray(obj["eps1"]), np.asarray(obj["eps2"]))


def save_errors(path, errors):
    with open(path, "w") as fh:
        json.dump(errors_to_json(errors), fh)


def load_errors(path):
    with open(path) as fh:
        return errors_from_json(json.load(fh))
