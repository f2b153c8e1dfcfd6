"""Cost functions, analytic mesh gradients, optimizers, and training loops.

Gradients are computed by reverse accumulation through the layered product:
one forward pass stores per-layer activations, one backward pass pulls the
residual through the adjoint layers. For a real parameter p of layer T_j the
chain rule gives

    dL/dp = 2 Re < B_j, (dT_j/dp) A_{j-1} >,   B_j = T_{j+1}^† ... T_L^† G,

where G is the cotangent of the mesh output (G = ÛX - Y for the squared
error ``L_train = ||ÛX - Y||_F^2``). Everything is exact; finite
differences exist only as a testing oracle.

Training follows the synthetic-data protocol: each iteration draws a fresh
batch of unit-norm complex inputs, labels them through the target matrix,
takes one optimizer step, and periodically evaluates the test cost with the
identity as input (the mean square error against the target itself).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .core import is_unitary, mse_cost, random_unit_columns, spawn_rngs
from .haar import haar_initialize, uniform_initialize
from .mesh import (BeamsplitterErrors, PhaseParams, _compiled_layers,
                   _apply_column, _apply_column_adjoint, forward,
                   forward_adjoint, mesh_unitary, mzi_entries_dtheta,
                   rectangular_spec)

__all__ = [
    "TrainConfig",
    "TrainTrace",
    "PhaseGradients",
    "train_cost",
    "gradients",
    "mesh_vjp",
    "finite_difference_gradients",
    "AdamState",
    "adam_step",
    "train_unitary",
    "SvdModel",
    "svd_matrix",
    "svd_test_cost",
    "train_svd",
]

TEST_STRIDE = 50  # iterations between test-cost evaluations


# --- configuration and traces --------------------------------------------

@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    ``optimizer`` is "adam" (with beta1/beta2/eps_adam) or "sgd";
    ``error_model`` is "none" or "gaussian" (with error_sigma, drawn once at
    setup with eps1 = eps2 per MZI); ``init`` is "haar" or "uniform". The
    seed fully determines initialization, error draw and batch sequence.
    """

    iterations: int
    batch_size: int
    learning_rate: float = 0.0025
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    error_model: str = "none"
    error_sigma: float = 0.0
    init: str = "haar"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.error_model not in ("none", "gaussian"):
            raise ValueError(f"unknown error model {self.error_model!r}")
        if self.init not in ("haar", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")

    def to_json(self):
        opt = ({"kind": "adam", "beta1": self.beta1, "beta2": self.beta2,
                "eps_adam": self.eps_adam}
               if self.optimizer == "adam" else {"kind": "sgd"})
        err = ({"kind": "gaussian", "sigma": self.error_sigma}
               if self.error_model == "gaussian" else {"kind": "none"})
        return {
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "optimizer": opt,
            "seed": self.seed,
            "error_model": err,
            "init": self.init,
        }

    @classmethod
    def from_json(cls, obj):
        kwargs = dict(
            iterations=int(obj["iterations"]),
            batch_size=int(obj["batch_size"]),
            learning_rate=float(obj.get("learning_rate", 0.0025)),
            seed=int(obj.get("seed", 0)),
            init=obj.get("init", "haar"),
        )
        opt = obj.get("optimizer", "adam")
        if isinstance(opt, str):
            kwargs["optimizer"] = opt
        else:
            kwargs["optimizer"] = opt["kind"]
            for key in ("beta1", "beta2", "eps_adam"):
                if key in opt:
                    kwargs[key] = float(opt[key])
        err = obj.get("error_model", "none")
        if isinstance(err, str):
            kwargs["error_model"] = err
        else:
            kwargs["error_model"] = err["kind"]
            if "sigma" in err:
                kwargs["error_sigma"] = float(err["sigma"])
        return cls(**kwargs)


@dataclass
class TrainTrace:
    """Cost history plus the final state of a training run."""

    train_costs: np.ndarray
    test_iterations: np.ndarray
    test_costs: np.ndarray
    final_params: PhaseParams = None
    final_error_map: np.ndarray = None
    final_model: "SvdModel" = None

    @property
    def final_test_cost(self):
        return float(self.test_costs[-1])

    def save_costs_csv(self, path):
        """Write (iteration, train_cost, test_cost) rows; test cost only at
        its evaluation iterations, empty otherwise."""
        tests = {int(i): float(c)
                 for i, c in zip(self.test_iterations, self.test_costs)}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "train_cost", "test_cost"])
            if 0 in tests:
                w.writerow([0, "", repr(tests[0])])
            for i, c in enumerate(self.train_costs, start=1):
                w.writerow([i, repr(float(c)),
                            repr(tests[i]) if i in tests else ""])


@dataclass
class PhaseGradients:
    """Gradient of a scalar cost with respect to every mesh phase."""

    theta: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray

    def flatten(self):
        return np.concatenate([self.theta, self.phi, self.gamma])


def _params_from_vector(vec, mzi_count):
    return PhaseParams(vec[:mzi_count], vec[mzi_count:2 * mzi_count],
                       vec[2 * mzi_count:])


# --- costs and gradients --------------------------------------------------

def train_cost(y_hat, y):
    """Squared Frobenius residual ``||y_hat - y||_F^2`` of a label batch."""
    y_hat = np.asarray(y_hat)
    y = np.asarray(y)
    if y_hat.shape != y.shape:
        raise ValueError(f"dimension mismatch: {y_hat.shape} vs {y.shape}")
    d = y_hat - y
    return float(np.sum(d.real**2 + d.imag**2))


def _forward_acts(params, ops, x):
    """Forward pass keeping the activation after the phase screen and after
    every layer."""
    act = np.asarray(x, dtype=np.complex128) * np.exp(1j * params.gamma)[:, None]
    acts = [act]
    for op in ops:
        if op[0] == "perm":
            act = act[op[1]]
        else:
            act = act.copy()
            _apply_column(act, op[1], op[3])
        acts.append(act)
    return acts


def _backward(spec, params, errors, ops, acts, g_out):
    d_theta = np.zeros(spec.mzi_count)
    d_phi = np.zeros(spec.mzi_count)
    b = np.asarray(g_out, dtype=np.complex128).copy()
    for j in range(len(ops) - 1, -1, -1):
        op = ops[j]
        if op[0] == "perm":
            b = b[op[2]]
            continue
        tops0, (a0, a1) = op[1], op[2]
        at = acts[j][tops0]
        ab = acts[j][tops0 + 1]
        gt = b[tops0]
        gb = b[tops0 + 1]
        d11, d12, d21, d22 = mzi_entries_dtheta(
            params.theta[a0:a1], params.phi[a0:a1],
            errors.eps1[a0:a1], errors.eps2[a0:a1])
        contrib = (gt.conj() * (d11[:, None] * at + d12[:, None] * ab)
                   + gb.conj() * (d21[:, None] * at + d22[:, None] * ab))
        d_theta[a0:a1] = 2 * np.real(contrib.sum(axis=1))
        out_top = acts[j + 1][tops0]
        d_phi[a0:a1] = 2 * np.imag((out_top.conj() * gt).sum(axis=1))
        _apply_column_adjoint(b, tops0, op[3])
    d_gamma = 2 * np.imag((acts[0].conj() * b).sum(axis=1))
    g_in = b * np.exp(-1j * params.gamma)[:, None]
    return PhaseGradients(d_theta, d_phi, d_gamma), g_in


def mesh_vjp(spec, params, errors, x, g_out):
    """Pull a cotangent back through the mesh.

    For a cost L with differential dL = 2 Re <g_out, d(mesh(x))>, returns
    (PhaseGradients, g_in) where g_in is the cotangent of x (the adjoint
    mesh applied to g_out).
    """
    if errors is None:
        errors = BeamsplitterErrors.none(spec)
    ops = _compiled_layers(spec, params, errors)
    acts = _forward_acts(params, ops, x)
    return _backward(spec, params, errors, ops, acts, g_out)


def _cost_and_gradients(spec, params, errors, x, y):
    if errors is None:
        errors = BeamsplitterErrors.none(spec)
    ops = _compiled_layers(spec, params, errors)
    acts = _forward_acts(params, ops, x)
    residual = acts[-1] - y
    cost = float(np.sum(residual.real**2 + residual.imag**2))
    grads, _ = _backward(spec, params, errors, ops, acts, residual)
    return cost, grads


def gradients(spec, params, errors, x, y):
    """Exact gradient of ``train_cost(forward(x), y)`` for every phase."""
    return _cost_and_gradients(spec, params, errors, x, y)[1]


def finite_difference_gradients(spec, params, errors, x, y, step=1e-6):
    """Central-difference gradient oracle (O(#params) cost evaluations)."""
    def cost_of(p):
        return train_cost(forward(spec, p, errors, x), y)

    out = []
    for arr_name in ("theta", "phi", "gamma"):
        base = getattr(params, arr_name)
        grad = np.zeros_like(base)
        for i in range(base.size):
            p = params.copy()
            getattr(p, arr_name)[i] = base[i] + step
            hi = cost_of(p)
            getattr(p, arr_name)[i] = base[i] - step
            lo = cost_of(p)
            grad[i] = (hi - lo) / (2 * step)
        out.append(grad)
    return PhaseGradients(*out)


# --- optimizers ------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment accumulators for the Adam update."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size))


def adam_step(state, params_vec, grads_vec, lr,
              beta1=0.9, beta2=0.999, eps_adam=1e-8):
    """One bias-corrected Adam update; mutates ``state``, returns new params."""
    state.t += 1
    state.m = beta1 * state.m + (1 - beta1) * grads_vec
    state.v = beta2 * state.v + (1 - beta2) * grads_vec**2
    m_hat = state.m / (1 - beta1**state.t)
    v_hat = state.v / (1 - beta2**state.t)
    return params_vec - lr * m_hat / (np.sqrt(v_hat) + eps_adam)


def _make_stepper(config, size):
    if config.optimizer == "adam":
        state = AdamState.zeros(size)

        def step(vec, grad):
            return adam_step(state, vec, grad, config.learning_rate,
                             config.beta1, config.beta2, config.eps_adam)
    else:
        def step(vec, grad):
            return vec - config.learning_rate * grad
    return step


# --- training loops --------------------------------------------------------

def _initial_params(spec, config, rng):
    if config.init == "haar":
        return haar_initialize(spec, rng)
    return uniform_initialize(spec, rng)


def _draw_errors(spec, config, rng):
    if config.error_model == "gaussian":
        return BeamsplitterErrors.gaussian(spec, config.error_sigma, rng)
    return BeamsplitterErrors.none(spec)


def train_unitary(spec, target, config):
    """Fit the mesh to a target unitary by stochastic gradient descent.

    Per iteration: draw a fresh batch of ``batch_size`` unit-norm inputs,
    label them through the target, take one optimizer step on the squared
    residual. The test cost (mean square error against the target itself)
    is recorded at iteration 0, every ``TEST_STRIDE`` iterations, and at the
    end. Identical configs produce identical traces.
    """
    target = np.asarray(target, dtype=np.complex128)
    if target.shape != (spec.n, spec.n):
        raise ValueError(f"target shape {target.shape} does not match n={spec.n}")
    if not is_unitary(target, 1e-8):
        raise ValueError("target must be unitary")
    rng_init, rng_err, rng_batch = spawn_rngs(config.seed, 3)
    params = _initial_params(spec, config, rng_init)
    errors = _draw_errors(spec, config, rng_err)

    m = spec.mzi_count
    vec = np.concatenate([params.theta, params.phi, params.gamma])
    step = _make_stepper(config, vec.size)

    def test_cost(v):
        return mse_cost(mesh_unitary(spec, _params_from_vector(v, m), errors),
                        target)

    train_costs = np.empty(config.iterations)
    test_iters, test_costs = [0], [test_cost(vec)]
    for it in range(1, config.iterations + 1):
        x = random_unit_columns(spec.n, config.batch_size, rng_batch)
        y = target @ x
        p = _params_from_vector(vec, m)
        cost, grads = _cost_and_gradients(spec, p, errors, x, y)
        vec = step(vec, grads.flatten())
        train_costs[it - 1] = cost
        if it % TEST_STRIDE == 0 or it == config.iterations:
            test_iters.append(it)
            test_costs.append(test_cost(vec))

    final = _params_from_vector(vec, m).copy()
    err_map = np.abs(mesh_unitary(spec, final, errors) - target)
    return TrainTrace(train_costs, np.asarray(test_iters),
                      np.asarray(test_costs), final_params=final,
                      final_error_map=err_map)


# --- SVD architecture -------------------------------------------------------

@dataclass
class SvdModel:
    """Linear operator A_hat = U_mesh . diag(sigma) . V_mesh^dagger.

    Two unitary meshes flanking a diagonal layer of non-negative gains
    implement an arbitrary (square) linear operation.
    """

    u_spec: object
    u_params: PhaseParams
    v_spec: object
    v_params: PhaseParams
    sigma: np.ndarray

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if np.any(self.sigma < 0):
            raise ValueError("sigma gains must be non-negative")


def svd_matrix(model, u_errors=None, v_errors=None):
    """Dense matrix implemented by an :class:`SvdModel`."""
    u_hat = mesh_unitary(model.u_spec, model.u_params, u_errors)
    v_hat = mesh_unitary(model.v_spec, model.v_params, v_errors)
    return u_hat @ (model.sigma[:, None] * v_hat.conj().T)


def svd_test_cost(model, a, u_errors=None, v_errors=None):
    """Normalized error ``N ||A_hat - A||_F^2 / (2 ||A||_F^2)``."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    a_hat = svd_matrix(model, u_errors, v_errors)
    num = np.sum(np.abs(a_hat - a) ** 2)
    return float(n * num / (2 * np.sum(np.abs(a) ** 2)))


def train_svd(m_dim, n_dim, target, config, initial=None):
    """Jointly train both meshes and the gain layer toward a target matrix.

    Only the square case (m_dim == n_dim) is supported. ``initial`` may
    preset an :class:`SvdModel` (e.g. from an exact factorization);
    otherwise both meshes are initialized per the config and sigma starts
    at all ones. Gains are projected to >= 0 after every step.
    """
    if m_dim != n_dim:
        raise ValueError("only square targets (m_dim == n_dim) are supported")
    n = n_dim
    target = np.asarray(target, dtype=np.complex128)
    if target.shape != (n, n):
        raise ValueError(f"target shape {target.shape} does not match n={n}")
    if not np.all(np.isfinite(target.real) & np.isfinite(target.imag)):
        raise ValueError("target must be finite")

    rng_u, rng_v, rng_err, rng_batch = spawn_rngs(config.seed, 4)
    if initial is not None:
        model = SvdModel(initial.u_spec, initial.u_params.copy(),
                         initial.v_spec, initial.v_params.copy(),
                         initial.sigma.copy())
    else:
        u_spec = rectangular_spec(n, n)
        v_spec = rectangular_spec(n, n)
        model = SvdModel(u_spec, _initial_params(u_spec, config, rng_u),
                         v_spec, _initial_params(v_spec, config, rng_v),
                         np.ones(n))
    u_errors = _draw_errors(model.u_spec, config, rng_err)
    v_errors = _draw_errors(model.v_spec, config, rng_err)

    mu = model.u_spec.mzi_count
    mv = model.v_spec.mzi_count
    pu, pv = 2 * mu + n, 2 * mv + n

    def pack():
        return np.concatenate([
            model.u_params.theta, model.u_params.phi, model.u_params.gamma,
            model.v_params.theta, model.v_params.phi, model.v_params.gamma,
            model.sigma])

    def unpack(vec):
        model.u_params = _params_from_vector(vec[:pu], mu)
        model.v_params = _params_from_vector(vec[pu:pu + pv], mv)
        model.sigma = np.maximum(vec[pu + pv:], 0.0)

    vec = pack()
    step = _make_stepper(config, vec.size)
    train_costs = np.empty(config.iterations)
    test_iters = [0]
    test_costs = [svd_test_cost(model, target, u_errors, v_errors)]
    for it in range(1, config.iterations + 1):
        x = random_unit_columns(n, config.batch_size, rng_batch)
        y = target @ x
        w1 = forward_adjoint(model.v_spec, model.v_params, v_errors, x)
        w2 = model.sigma[:, None] * w1
        y_hat = forward(model.u_spec, model.u_params, u_errors, w2)
        residual = y_hat - y
        cost = float(np.sum(residual.real**2 + residual.imag**2))
        u_grads, g_u = mesh_vjp(model.u_spec, model.u_params, u_errors,
                                w2, residual)
        sigma_grad = 2 * np.real((g_u.conj() * w1).sum(axis=1))
        v_grads, _ = mesh_vjp(model.v_spec, model.v_params, v_errors,
                              model.sigma[:, None] * g_u, x)
        grad_vec = np.concatenate([u_grads.flatten(), v_grads.flatten(),
                                   sigma_grad])
        vec = step(vec, grad_vec)
        vec[pu + pv:] = np.maximum(vec[pu + pv:], 0.0)
        unpack(vec)
        train_costs[it - 1] = cost
        if it % TEST_STRIDE == 0 or it == config.iterations:
            test_iters.append(it)
            test_costs.append(svd_test_cost(model, target, u_errors, v_errors))

    a_hat = svd_matrix(model, u_errors, v_errors)
    return TrainTrace(train_costs, np.asarray(test_iters),
                      np.asarray(test_costs), final_model=model,
                      final_error_map=np.abs(a_hat - target))
