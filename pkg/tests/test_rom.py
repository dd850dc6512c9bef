import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftrom.decomp import LowRankField, ftr_threshold, pod, projection_error, relative_error
from ftrom.errors import DetectionError
from ftrom.fom import (
    Trajectory,
    VortexPairSpec,
    advection_1d,
    analytic_rd_solution,
    ard_2d,
    ard_grid,
    ard_initial_condition,
    disk_grid,
    grid1d,
    integrate,
    moving_disk_snapshots,
    rd_front,
    rd_grid,
    rd_trajectory,
    reaction_diffusion_1d,
    rhs,
)
from ftrom.front import sigmoid_front, tanh_front
from ftrom.rom import (
    HyperReductionConfig,
    build_reduced_advection,
    characteristic_scales,
    fit_initial_condition,
    ftr_linear_galerkin_step,
    ftr_map,
    hyper_rhs,
    hyper_select,
    manifold_galerkin_rhs,
    pod_map,
    simulate_rom,
)


def random_map(rng, M=80, r=4, grid=None, front=None):
    Psi, _ = np.linalg.qr(rng.normal(size=(M, r)))
    return ftr_map(LowRankField(Psi, np.zeros((1, r))), front or tanh_front(1.0), grid)


@pytest.fixture(scope="module")
def rd_small():
    """Small rd1d FTR map trained on delta in {0.2, 1}."""
    g = rd_grid(500)
    f = rd_front()
    trajs = [rd_trajectory(d, g, n_t=21) for d in (0.2, 1.0)]
    Q = np.hstack([t.states for t in trajs])
    lr, rep = ftr_threshold(Q, f, 4, tau=4.0, max_iter=1500, tol=0)
    return g, f, lr, rep, trajs


@pytest.fixture(scope="module")
def ard_small():
    g = ard_grid(64)
    prob = ard_2d(g, 10.0, VortexPairSpec())
    tr = integrate(prob, ard_initial_condition(g), (0, 0.3), n_save=31)
    f = sigmoid_front(1.0)
    lr, rep = ftr_threshold(tr.states, f, 4, tau=4.0, max_iter=300, tol=0)
    return g, prob, tr, ftr_map(lr, f, g), lr


class TestDecode:
    def test_sigmoid_zero(self, rng):
        rm = random_map(rng, front=sigmoid_front(1.0))
        np.testing.assert_array_equal(rm.decode(np.zeros(4)), 0.5)

    def test_pod_unit_vector(self, rng):
        U, _ = np.linalg.qr(rng.normal(size=(30, 3)))
        rm = pod_map(U)
        assert rm.kind == "pod_linear"
        np.testing.assert_array_equal(rm.decode(np.eye(3)[1]), U[:, 1])

    def test_disk_round_trip(self):
        Q = moving_disk_snapshots(n_t=30, grid=disk_grid(65)).states
        f = tanh_front(0.01)
        lr, rep = ftr_threshold(Q, f, 3, tau=0.1, max_iter=300, momentum=0.9, tol=0)
        rm = ftr_map(lr, f)
        assert relative_error(Q, rm.decode(lr.amplitudes.T)) == pytest.approx(rep.rel_error, rel=1e-10)


class TestJacobian:
    def test_pod_is_basis(self, rng):
        U, _ = np.linalg.qr(rng.normal(size=(30, 3)))
        np.testing.assert_array_equal(pod_map(U).jacobian(rng.normal(size=3)), U)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 100_000), kind=st.sampled_from(["tanh", "sigmoid"]))
    def test_matches_finite_differences(self, seed, kind):
        rng = np.random.default_rng(seed)
        f = tanh_front(0.5) if kind == "tanh" else sigmoid_front(0.5)
        rm = random_map(rng, M=60, r=3, front=f)
        a = rng.normal(size=3) * 3
        J = rm.jacobian(a)
        for _ in range(5):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            fd = (rm.decode(a + 1e-5 * v) - rm.decode(a - 1e-5 * v)) / 2e-5
            assert np.linalg.norm(fd - J @ v) <= 1e-6 * np.linalg.norm(J @ v)

    def test_saturated_rows(self, rng):
        rm = random_map(rng, front=tanh_front(0.01))
        a = np.ones(4) * 1e3
        J = rm.jacobian(a)
        sat = np.abs(rm.levelset(a)) > 1
        assert np.abs(J[sat]).max() < 1e-12


class TestManifoldGalerkin:
    def test_zero_rhs(self, rng):
        rm = random_map(rng)
        out = manifold_galerkin_rhs(rm, None, rng.normal(size=4), 0.0, F=lambda q, t: np.zeros_like(q))
        np.testing.assert_array_equal(out, 0.0)

    def test_tangent_exactness(self, rng):
        rm = random_map(rng)
        a, w = rng.normal(size=4), rng.normal(size=4)
        J = rm.jacobian(a)
        out = manifold_galerkin_rhs(rm, None, a, 0.0, F=lambda q, t: J @ w)
        np.testing.assert_allclose(out, w, atol=1e-8)

    def test_pod_reduction_identity(self, rng):
        g = grid1d(-5, 5, 100)
        prob = reaction_diffusion_1d(g, 0.7)
        U, _ = np.linalg.qr(rng.normal(size=(100, 5)))
        a = rng.normal(size=5)
        out = manifold_galerkin_rhs(pod_map(U, g), prob, a, 0.0)
        ref = U.T @ rhs(prob, U @ a, 0.0)
        assert np.abs(out - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


    def test_saturated_state_is_damped(self, ard_small):
        # q within rounding of 1 everywhere: no resolvable signal, the latent drift stops
        g, prob, tr, _, lr = ard_small
        Psi, _ = np.linalg.qr(np.column_stack([np.ones(g.size), lr.basis[:, :3]]))
        rm = ftr_map(LowRankField(Psi, np.zeros((1, 4))), sigmoid_front(1.0), g)
        x = g.points()[:, 0]
        a = np.linalg.lstsq(Psi, 26.0 + 4.0 * x / x.max(), rcond=None)[0]
        assert 1 - 1e-8 < rm.decode(a).min() < 1.0
        da = manifold_galerkin_rhs(rm, prob, a, 0.1)
        assert np.all(np.isfinite(da)) and np.abs(rm.basis @ da).max() < 1e-3
        hy = hyper_rhs(rm, prob, a, 0.1, HyperReductionConfig(0.2))
        assert np.all(np.isfinite(hy)) and np.abs(rm.basis @ hy).max() < 1e-3

    def test_damping_negligible_on_active_front(self, ard_small):
        g, prob, tr, rm, lr = ard_small
        a = lr.amplitudes[10]
        J = rm.jacobian(a)
        ref = np.linalg.lstsq(J, rhs(prob, rm.decode(a), 0.1), rcond=None)[0]
        out = manifold_galerkin_rhs(rm, prob, a, 0.1)
        np.testing.assert_allclose(out, ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())

class TestHyperSelect:
    def _map_x(self):
        g = grid1d(-1, 1, 101, periodic=False)
        x = g.axis(0)
        basis = (x / np.linalg.norm(x))[:, None]
        return ftr_map(LowRankField(basis, np.zeros((1, 1))), tanh_front(), g), x

    def test_linear_levelset(self):
        rm, x = self._map_x()
        P, _ = hyper_select(rm, [np.linalg.norm(x)], HyperReductionConfig(), n_samples=10)
        expect = np.sort(np.argsort(np.abs(x), kind="stable")[:10])
        np.testing.assert_array_equal(P, expect)
        assert np.abs(x[P]).max() <= 5 * (x[1] - x[0]) + 1e-12

    def test_ties_by_index(self):
        g = grid1d(0, 1, 20)
        basis = np.ones((20, 1)) / np.sqrt(20)
        rm = ftr_map(LowRankField(basis, np.zeros((1, 1))), tanh_front(), g)
        P, _ = hyper_select(rm, [1.0], HyperReductionConfig(), n_samples=10)
        np.testing.assert_array_equal(P, np.arange(10))

    def test_deterministic(self, rng):
        g = grid1d(0, 1, 200)
        rm = random_map(rng, M=200, grid=g)
        a = rng.normal(size=4)
        cfg = HyperReductionConfig(0.1)
        P1, H1 = hyper_select(rm, a, cfg)
        P2, H2 = hyper_select(rm, a, cfg)
        assert P1.tobytes() == P2.tobytes() and H1.tobytes() == H2.tobytes()

    def test_halo(self, rng):
        g = grid1d(0, 1, 60)
        rm = random_map(rng, M=60, grid=g)
        P, H = hyper_select(rm, rng.normal(size=4), HyperReductionConfig(), n_samples=5)
        expect = np.unique(((P[:, None] + np.arange(-3, 4)[None, :]) % 60).ravel())
        np.testing.assert_array_equal(H, expect)

    def test_too_many_samples(self, rng):
        rm = random_map(rng, M=50, grid=grid1d(0, 1, 50))
        with pytest.raises(ValueError):
            hyper_select(rm, np.zeros(4), HyperReductionConfig(), n_samples=51)

    def test_minimum_sample_count(self):
        assert HyperReductionConfig(0.01).n_samples(1000, 4) == 40

    def test_band_around_contour(self, ard_small):
        g, prob, tr, rm, lr = ard_small
        j = int(np.argmin(np.abs(tr.times - 0.07)))
        a = fit_initial_condition(rm, tr.states[:, j], lr.amplitudes[j])
        # about four cells across the front
        P, _ = hyper_select(rm, a, HyperReductionConfig(0.05))
        q = tr.states[P, j]
        assert np.mean(np.abs(q - 0.5) < 0.49) >= 0.95


class TestHyperRhs:
    def test_full_sampling_matches_1d(self, rng):
        g = grid1d(-5, 5, 120)
        rm = random_map(rng, M=120, grid=g)
        prob = reaction_diffusion_1d(g, 0.8)
        for _ in range(5):
            a = rng.normal(size=4) * 5
            full = manifold_galerkin_rhs(rm, prob, a, 0.1)
            hyp = hyper_rhs(rm, prob, a, 0.1, HyperReductionConfig(1.0))
            np.testing.assert_allclose(hyp, full, atol=1e-10 * max(1, np.abs(full).max()))

    def test_full_sampling_matches_2d(self, ard_small):
        g, prob, tr, rm, lr = ard_small
        for j in (0, 10, 30):
            a = lr.amplitudes[j]
            full = manifold_galerkin_rhs(rm, prob, a, tr.times[j])
            hyp = hyper_rhs(rm, prob, a, tr.times[j], HyperReductionConfig(1.0))
            np.testing.assert_allclose(hyp, full, rtol=0, atol=1e-10 * np.abs(full).max())

    def test_eval_counter(self, rng):
        g = grid1d(-5, 5, 400)
        rm = random_map(rng, M=400, grid=g)
        prob = reaction_diffusion_1d(g, 0.8)
        cfg = HyperReductionConfig(0.1)
        a = rng.normal(size=4)
        _, H = hyper_select(rm, a, cfg)
        flags = {}
        hyper_rhs(rm, prob, a, 0.0, cfg, flags=flags)
        assert flags["evals"] == H.size

    def test_cost_bound_1d(self, rd_small):
        g, f, lr, _, trajs = rd_small
        rm = ftr_map(lr, f, g)
        cfg = HyperReductionConfig(0.1)
        M = g.size
        for a in lr.amplitudes[::5]:
            _, H = hyper_select(rm, a, cfg)
            assert H.size <= 0.16 * M


class TestLinearAdvection:
    def test_fourier_modes_antisymmetric(self):
        g = grid1d(0, 1, 64)
        x = g.axis(0)
        cols = [np.ones_like(x)]
        for k in (1, 2, 3):
            cols += [np.cos(2 * np.pi * k * x), np.sin(2 * np.pi * k * x)]
        Psi = np.array(cols).T
        Psi /= np.linalg.norm(Psi, axis=0)
        L = build_reduced_advection(Psi, g).components[0]
        np.testing.assert_allclose(L, -L.T, atol=1e-10)
        np.testing.assert_allclose(L[0], 0, atol=1e-10)
        np.testing.assert_allclose(L[:, 0], 0, atol=1e-10)

    def test_zero_velocity(self, rng):
        g = grid1d(0, 1, 40)
        Psi, _ = np.linalg.qr(rng.normal(size=(40, 3)))
        op = build_reduced_advection(Psi, g, lambda t: 0.0)
        a0 = rng.normal(size=3)
        res = simulate_rom(pod_map(Psi, g), None, a0, np.linspace(0, 1, 5), operator=op)
        np.testing.assert_array_equal(res.amplitudes, a0[:, None].repeat(5, 1))

    def test_matches_pod_galerkin(self, rng):
        # linear advection: the two ROMs share the same reduced operator
        g = grid1d(0, 2, 50)
        Psi, _ = np.linalg.qr(rng.normal(size=(50, 4)))
        op = build_reduced_advection(Psi, g, lambda t: 1.5)
        a = rng.normal(size=4)
        out = manifold_galerkin_rhs(pod_map(Psi, g), advection_1d(g, lambda t: 1.5), a, 0.0)
        np.testing.assert_allclose(ftr_linear_galerkin_step(op, a, 0.0), out, atol=1e-10)


class TestInitialCondition:
    def test_planted(self, rng):
        rm = random_map(rng, M=100, r=3)
        a_star = rng.normal(size=3) * 4
        a = fit_initial_condition(rm, rm.decode(a_star), a_star + 0.01)
        np.testing.assert_allclose(a, a_star, atol=1e-8)

    def test_pod_single_step(self, rng):
        U, _ = np.linalg.qr(rng.normal(size=(40, 3)))
        q = rng.normal(size=40)
        a, info = fit_initial_condition(pod_map(U), q, np.zeros(3), max_iter=1, return_info=True)
        np.testing.assert_allclose(a, U.T @ q, atol=1e-12)

    def test_interpolated_guess(self, rd_small):
        g, f, lr, _, trajs = rd_small
        rm = ftr_map(lr, f, g)
        n = trajs[0].n_times
        a02, a10 = lr.amplitudes[0], lr.amplitudes[n]
        w = (0.3 - 0.2) / (1.0 - 0.2)
        guess = (1 - w) * a02 + w * a10
        q0 = analytic_rd_solution(g.axis(0), 0.0, 0.3)
        a, info = fit_initial_condition(rm, q0, guess, return_info=True)
        proj = projection_error(q0[:, None], rm, a_guess=[guess])
        assert np.linalg.norm(q0 - rm.decode(a)) / np.linalg.norm(q0) <= 2 * proj

    def test_bad_guess(self, rng):
        with pytest.raises(ValueError):
            fit_initial_condition(random_map(rng), np.zeros(80), [np.nan] * 4)


class TestCharacteristicScales:
    @pytest.mark.parametrize("delta,tol", [(1.0, 0.05), (0.2, 0.1)])
    def test_analytic_speed(self, delta, tol):
        tr = rd_trajectory(delta, rd_grid(), n_t=11)
        c, lf, tf = characteristic_scales(tr, kappa=1.0)
        assert c == pytest.approx(2 / delta, rel=tol)
        assert lf == pytest.approx(delta / 2, rel=tol)
        assert tf == pytest.approx(lf / c)

    def test_stationary(self):
        g = grid1d(-1, 1, 50)
        q = np.tanh(g.axis(0)) * 0.5 + 0.5
        tr = Trajectory(np.array([0.0, 1.0]), np.column_stack([q, q]), None, g)
        with pytest.raises(DetectionError):
            characteristic_scales(tr)

    def test_no_crossing(self):
        g = grid1d(-1, 1, 50)
        tr = Trajectory(np.array([0.0, 1.0]), np.zeros((50, 2)), None, g)
        with pytest.raises(DetectionError):
            characteristic_scales(tr)


class TestSimulate:
    def test_rd_online_small(self, rd_small):
        g, f, lr, rep, trajs = rd_small
        rm = ftr_map(lr, f, g)
        n = trajs[0].n_times
        guess = 0.5 * (lr.amplitudes[0] + lr.amplitudes[n])
        delta = 0.6
        t = np.linspace(0, 1, 11)
        q0 = analytic_rd_solution(g.axis(0), 0.0, delta)
        a0 = fit_initial_condition(rm, q0, guess)
        full = simulate_rom(rm, reaction_diffusion_1d(g, delta), a0, t)
        hyp = simulate_rom(rm, reaction_diffusion_1d(g, delta), a0, t, cfg=HyperReductionConfig(0.2), record_steps=True)
        ref = analytic_rd_solution(g.axis(0)[:, None], t[None, :], delta)
        e_full = relative_error(ref, full.states(rm))
        e_hyp = relative_error(ref, hyp.states(rm))
        assert e_full < 0.05 and e_hyp < 2 * e_full + 1e-3
        assert hyp.evals_per_rhs() < 0.3 * g.size
        assert len(hyp.steps) == hyp.n_accepted

    def test_run_report_csv(self, tmp_path, rng):
        g = grid1d(0, 1, 40)
        Psi, _ = np.linalg.qr(rng.normal(size=(40, 3)))
        op = build_reduced_advection(Psi, g, lambda t: 1.0)
        res = simulate_rom(pod_map(Psi, g), None, rng.normal(size=3), np.linspace(0, 1, 3), operator=op,
                           record_steps=True)
        res.to_csv(tmp_path / "run.csv")
        lines = (tmp_path / "run.csv").read_text().splitlines()
        assert lines[0] == "t,a_norm,regularized,rhs_evals,wall_s"
        assert len(lines) == res.n_accepted + 1
