import numpy as np
import pytest

from meshopt import core, haar, mesh, train
from meshopt.decompose import clements_decompose


def random_setup(spec, seed, sigma=0.0, batch=4):
    rng = core.seeded_rng(seed)
    params = haar.haar_initialize(spec, rng)
    errors = (mesh.BeamsplitterErrors.gaussian(spec, sigma, rng)
              if sigma else None)
    x = core.random_unit_columns(spec.n, batch, rng)
    y = core.gram_schmidt_haar(spec.n, rng) @ x
    return params, errors, x, y


def max_rel_err(a, b, floor=1e-8):
    out = 0.0
    for name in ("theta", "phi", "gamma"):
        ga, gb = getattr(a, name), getattr(b, name)
        out = max(out, np.max(np.abs(ga - gb) / np.maximum(np.abs(gb), floor)))
    return out


class TestTrainCost:
    def test_zero_at_match(self):
        rng = core.seeded_rng(0)
        u = core.gram_schmidt_haar(6, rng)
        x = core.random_unit_columns(6, 12, rng)
        assert train.train_cost(u @ x, u @ x) == 0.0

    def test_identity_batch_relates_to_mse(self):
        rng = core.seeded_rng(1)
        u = core.gram_schmidt_haar(8, rng)
        v = core.gram_schmidt_haar(8, rng)
        assert train.train_cost(u, v) == pytest.approx(
            2 * 8 * core.mse_cost(u, v), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            train.train_cost(np.zeros((3, 2)), np.zeros((3, 3)))


class TestGradients:
    @pytest.mark.parametrize("make,sigma", [
        (lambda: mesh.rectangular_spec(8, 8), 0.0),
        (lambda: mesh.rectangular_spec(8, 8), 0.1),
        (lambda: mesh.rectangular_spec(8, 12), 0.1),
        (lambda: mesh.triangular_spec(8), 0.1),
        (lambda: mesh.permuting_spec(8), 0.1),
    ])
    def test_matches_finite_differences(self, make, sigma):
        spec = make()
        for seed in (0, 1):
            params, errors, x, y = random_setup(spec, seed, sigma)
            g = train.gradients(spec, params, errors, x, y)
            fd = train.finite_difference_gradients(spec, params, errors, x, y)
            assert max_rel_err(g, fd) < 1e-5

    def test_fd_step_plateau(self):
        spec = mesh.rectangular_spec(6, 6)
        params, errors, x, y = random_setup(spec, 3)
        g = train.gradients(spec, params, errors, x, y)
        errs = []
        for step in (1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
            fd = train.finite_difference_gradients(spec, params, errors, x, y,
                                                   step)
            errs.append(max_rel_err(g, fd, floor=1e-6))
        assert min(errs[1:4]) < 1e-5        # plateau of agreement mid-sweep
        assert errs[0] < 1e-2               # coarse step already close

    def test_zero_batch_zero_gradient(self):
        spec = mesh.rectangular_spec(4, 4)
        params = haar.haar_initialize(spec, core.seeded_rng(4))
        x = np.zeros((4, 3), dtype=complex)
        g = train.gradients(spec, params, None, x, x)
        assert not np.any(g.flatten())

    def test_zero_at_global_minimum(self):
        spec = mesh.rectangular_spec(6, 6)
        params = mesh.PhaseParams.zeros(spec)
        params.theta[:] = np.pi
        target = mesh.mesh_unitary(spec, params)
        x = core.random_unit_columns(6, 8, core.seeded_rng(5))
        g = train.gradients(spec, params, None, x, target @ x)
        assert np.max(np.abs(g.flatten())) < 1e-12

    def test_descent_direction(self):
        # A small SGD step along -gradient never increases the batch cost.
        n = 8
        spec = mesh.rectangular_spec(n, n)
        lr = 1e-3 / n
        worse = 0
        for seed in range(100):
            params, errors, x, y = random_setup(spec, seed, batch=3)
            cost0 = train.train_cost(mesh.forward(spec, params, errors, x), y)
            g = train.gradients(spec, params, errors, x, y)
            stepped = mesh.PhaseParams(params.theta - lr * g.theta,
                                       params.phi - lr * g.phi,
                                       params.gamma - lr * g.gamma)
            cost1 = train.train_cost(mesh.forward(spec, stepped, errors, x), y)
            worse += cost1 > cost0
        assert worse == 0


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        state = train.AdamState.zeros(4)
        p = np.array([1.0, -2.0, 3.0, 0.5])
        out = train.adam_step(state, p, np.zeros(4), lr=0.1)
        assert np.array_equal(out, p)

    def test_first_step_sign_scaled(self):
        state = train.AdamState.zeros(3)
        g = np.array([5.0, -0.01, 2.0])
        out = train.adam_step(state, np.zeros(3), g, lr=0.05)
        assert np.allclose(out, -0.05 * g / (np.abs(g) + 1e-8))

    def test_bias_correction_progression(self):
        state = train.AdamState.zeros(1)
        p = np.zeros(1)
        g = np.ones(1)
        for _ in range(10):
            p = train.adam_step(state, p, g, lr=0.1)
        assert state.t == 10
        assert p[0] == pytest.approx(-1.0, rel=1e-6)  # ~lr per step


class TestTrainUnitary:
    def test_deterministic(self):
        spec = mesh.rectangular_spec(6, 6)
        target = core.gram_schmidt_haar(6, core.seeded_rng(9))
        cfg = train.TrainConfig(iterations=120, batch_size=12, seed=3)
        a = train.train_unitary(spec, target, cfg)
        b = train.train_unitary(spec, target, cfg)
        assert np.array_equal(a.train_costs, b.train_costs)
        assert np.array_equal(a.test_costs, b.test_costs)
        assert np.array_equal(a.final_params.theta, b.final_params.theta)

    def test_cost_decreases(self):
        spec = mesh.rectangular_spec(8, 8)
        target = core.gram_schmidt_haar(8, core.seeded_rng(10))
        cfg = train.TrainConfig(iterations=600, batch_size=16, seed=1)
        trace = train.train_unitary(spec, target, cfg)
        assert trace.final_test_cost < 0.5 * trace.test_costs[0]

    def test_trace_layout(self):
        spec = mesh.rectangular_spec(4, 4)
        target = core.gram_schmidt_haar(4, core.seeded_rng(11))
        cfg = train.TrainConfig(iterations=75, batch_size=8, seed=0)
        trace = train.train_unitary(spec, target, cfg)
        assert trace.train_costs.shape == (75,)
        assert list(trace.test_iterations) == [0, 50, 75]
        assert trace.final_error_map.shape == (4, 4)
        # error map consistency: ||.||_F^2 = 2N * mse
        u_hat = mesh.mesh_unitary(spec, trace.final_params)
        assert np.sum(trace.final_error_map**2) == pytest.approx(
            2 * 4 * core.mse_cost(u_hat, target), rel=1e-10)

    def test_sgd_option(self):
        spec = mesh.rectangular_spec(4, 4)
        target = core.gram_schmidt_haar(4, core.seeded_rng(12))
        cfg = train.TrainConfig(iterations=150, batch_size=8, seed=0,
                                optimizer="sgd", learning_rate=0.01)
        trace = train.train_unitary(spec, target, cfg)
        assert trace.final_test_cost < trace.test_costs[0]

    def test_error_model_applied(self):
        spec = mesh.rectangular_spec(4, 4)
        target = core.gram_schmidt_haar(4, core.seeded_rng(13))
        cfg = train.TrainConfig(iterations=60, batch_size=8, seed=0,
                                error_model="gaussian", error_sigma=0.1)
        trace = train.train_unitary(spec, target, cfg)
        assert np.isfinite(trace.final_test_cost)

    def test_rejects_non_unitary_target(self):
        spec = mesh.rectangular_spec(4, 4)
        cfg = train.TrainConfig(iterations=10, batch_size=4)
        with pytest.raises(ValueError):
            train.train_unitary(spec, 2 * np.eye(4, dtype=complex), cfg)

    def test_costs_csv(self, tmp_path):
        spec = mesh.rectangular_spec(4, 4)
        target = core.gram_schmidt_haar(4, core.seeded_rng(14))
        cfg = train.TrainConfig(iterations=60, batch_size=8, seed=0)
        trace = train.train_unitary(spec, target, cfg)
        path = tmp_path / "costs.csv"
        trace.save_costs_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iteration,train_cost,test_cost"
        assert len(lines) == 1 + 1 + 60  # header + iteration 0 + iterations
        # every non-empty cell parses as a plain float
        for line in lines[1:]:
            for cell in line.split(",")[1:]:
                if cell:
                    float(cell)


class TestTrainConfigJson:
    def test_round_trip(self):
        cfg = train.TrainConfig(iterations=100, batch_size=32,
                                learning_rate=0.01, optimizer="adam",
                                beta1=0.8, seed=7, error_model="gaussian",
                                error_sigma=0.1, init="uniform")
        back = train.TrainConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_accepts_shorthand_strings(self):
        cfg = train.TrainConfig.from_json({
            "iterations": 10, "batch_size": 4, "optimizer": "sgd",
            "error_model": "none"})
        assert cfg.optimizer == "sgd"
        assert cfg.error_model == "none"

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            train.TrainConfig(iterations=0, batch_size=4)
        with pytest.raises(ValueError):
            train.TrainConfig(iterations=1, batch_size=4, optimizer="lbfgs")


class TestSvd:
    def test_exact_factorization_preset(self):
        n = 8
        rng = core.seeded_rng(20)
        a = core.complex_normal(rng, n, n)
        u, s, vh = np.linalg.svd(a)
        model = train.SvdModel(
            mesh.rectangular_spec(n, n), clements_decompose(u),
            mesh.rectangular_spec(n, n), clements_decompose(vh.conj().T),
            s)
        assert train.svd_test_cost(model, a) < 1e-10
        assert np.max(np.abs(train.svd_matrix(model) - a)) < 1e-8

    def test_gradients_match_finite_differences(self):
        # Joint gradient through U mesh, gains, and adjoint-applied V mesh.
        n = 4
        rng = core.seeded_rng(21)
        a = core.complex_normal(rng, n, n)
        u_spec = mesh.rectangular_spec(n, n)
        v_spec = mesh.rectangular_spec(n, n)
        model = train.SvdModel(u_spec, haar.haar_initialize(u_spec, rng),
                               v_spec, haar.haar_initialize(v_spec, rng),
                               rng.uniform(0.5, 2.0, n))
        x = core.random_unit_columns(n, 3, rng)
        y = a @ x

        def loss(m):
            w = m.sigma[:, None] * mesh.forward_adjoint(m.v_spec, m.v_params,
                                                        None, x)
            return train.train_cost(mesh.forward(m.u_spec, m.u_params, None, w), y)

        w1 = mesh.forward_adjoint(v_spec, model.v_params, None, x)
        w2 = model.sigma[:, None] * w1
        residual = mesh.forward(u_spec, model.u_params, None, w2) - y
        u_grads, g_u = train.mesh_vjp(u_spec, model.u_params, None, w2, residual)
        sigma_grad = 2 * np.real((g_u.conj() * w1).sum(axis=1))
        v_grads, _ = train.mesh_vjp(v_spec, model.v_params, None,
                                    model.sigma[:, None] * g_u, x)

        step = 1e-6
        for params, grads in ((model.u_params, u_grads),
                              (model.v_params, v_grads)):
            for name in ("theta", "phi", "gamma"):
                arr = getattr(params, name)
                g = getattr(grads, name)
                for i in range(arr.size):
                    keep = arr[i]
                    arr[i] = keep + step
                    hi = loss(model)
                    arr[i] = keep - step
                    lo = loss(model)
                    arr[i] = keep
                    fd = (hi - lo) / (2 * step)
                    assert abs(g[i] - fd) < 1e-5 * max(abs(fd), 1.0)
        for i in range(n):
            keep = model.sigma[i]
            model.sigma[i] = keep + step
            hi = loss(model)
            model.sigma[i] = keep - step
            lo = loss(model)
            model.sigma[i] = keep
            fd = (hi - lo) / (2 * step)
            assert abs(sigma_grad[i] - fd) < 1e-5 * max(abs(fd), 1.0)

    def test_training_reduces_cost(self):
        n = 6
        rng = core.seeded_rng(22)
        a = core.complex_normal(rng, n, n)
        cfg = train.TrainConfig(iterations=400, batch_size=12, seed=2)
        trace = train.train_svd(n, n, a, cfg)
        assert trace.final_test_cost < trace.test_costs[0]
        assert np.all(trace.final_model.sigma >= 0)

    def test_sigma_projection(self):
        n = 4
        rng = core.seeded_rng(23)
        a = core.complex_normal(rng, n, n)
        cfg = train.TrainConfig(iterations=100, batch_size=8, seed=3,
                                learning_rate=0.3)  # large steps force clipping
        trace = train.train_svd(n, n, a, cfg)
        assert np.all(trace.final_model.sigma >= 0)

    def test_rejects_rectangular_case(self):
        with pytest.raises(ValueError):
            train.train_svd(4, 6, np.zeros((4, 6)),
                            train.TrainConfig(iterations=1, batch_size=1))

    def test_deterministic(self):
        n = 4
        a = core.complex_normal(core.seeded_rng(24), n, n)
        cfg = train.TrainConfig(iterations=50, batch_size=6, seed=9)
        t1 = train.train_svd(n, n, a, cfg)
        t2 = train.train_svd(n, n, a, cfg)
        assert np.array_equal(t1.train_costs, t2.train_costs)
