import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pca_ewc.dc_solver import (
    DcConfig,
    dc_parts,
    dc_step,
    objective,
    polar_factor,
    riemannian_gradient,
    solve,
    subgradient,
)
from pca_ewc.errors import DimensionMismatch, SvdFailure
from pca_ewc.ewc import EwcState, fisher_matrix, initial_state
from pca_ewc.pca_core import apply_scaler, fit_pca, fit_scaler, pca_loss
from pca_ewc.simgen import generate_block

from conftest import max_principal_angle, random_instance, random_orthonormal, zscore


class TestObjective:
    def test_anchor_has_no_penalty(self, rng):
        state, X2 = random_instance(rng)
        assert objective(state.anchor, X2, state) == pytest.approx(pca_loss(state.anchor, X2))

    def test_vanishing_penalty(self, rng):
        X2 = zscore(rng.standard_normal((300, 5)) @ rng.standard_normal((5, 5)))
        pca = fit_pca(X2, n_components=2)
        state = EwcState(0.5e-12 * np.eye(5), random_orthonormal(rng, 5, 2), 0.0, 1e-12)
        residual = float(np.sum(np.sort(np.linalg.eigvalsh(X2.T @ X2))[:3]))
        assert objective(pca.loadings, X2, state) == pytest.approx(residual, rel=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_dc_split_matches(self, seed):
        rng = np.random.default_rng(seed)
        state, X2 = random_instance(rng)
        P = random_orthonormal(rng, *state.anchor.shape)
        g, h, c = dc_parts(P, X2, state)
        assert g - h + c == pytest.approx(objective(P, X2, state), rel=1e-9, abs=1e-9)


class TestSubgradient:
    def test_identity_gram(self, rng):
        X = np.eye(4)
        P = random_orthonormal(rng, 4, 2)
        np.testing.assert_allclose(subgradient(X, P), 2 * P)

    def test_central_differences(self, rng):
        X = rng.standard_normal((30, 5))
        P = random_orthonormal(rng, 5, 2)
        H = lambda Q: np.trace(Q.T @ X.T @ X @ Q)
        num = np.zeros_like(P)
        h = 1e-6
        for i in range(5):
            for j in range(2):
                E = np.zeros_like(P)
                E[i, j] = h
                num[i, j] = (H(P + E) - H(P - E)) / (2 * h)
        np.testing.assert_allclose(subgradient(X, P), num, atol=1e-5)


class TestPolar:
    def test_orthonormal_input_is_fixed(self, rng):
        R = random_orthonormal(rng, 6, 3)
        np.testing.assert_allclose(polar_factor(R), R, atol=1e-10)

    def test_positive_diagonal(self):
        R = np.zeros((5, 3))
        R[np.arange(3), np.arange(3)] = [3.0, 0.5, 2.0]
        np.testing.assert_allclose(polar_factor(R), np.eye(5)[:, :3], atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_search_oracle(self, seed):
        rng = np.random.default_rng(seed)
        R = rng.standard_normal((6, 2))
        best = np.linalg.norm(polar_factor(R) - R)
        for _ in range(2000):
            assert np.linalg.norm(random_orthonormal(rng, 6, 2) - R) >= best - 1e-12

    def test_non_finite(self):
        with pytest.raises(SvdFailure):
            polar_factor(np.array([[np.inf], [0.0]]))


class TestStep:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.booleans())
    def test_orthonormal_iterates(self, seed, shift):
        rng = np.random.default_rng(seed)
        state, X2 = random_instance(rng)
        P = dc_step(state, X2, state.anchor, shift=shift)
        assert np.linalg.norm(P.T @ P - np.eye(P.shape[1])) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_shifted_step_descends(self, seed):
        rng = np.random.default_rng(seed)
        state, X2 = random_instance(rng)
        P = random_orthonormal(rng, *state.anchor.shape)
        before = objective(P, X2, state)
        after = objective(dc_step(state, X2, P), X2, state)
        assert after <= before + 1e-9 * max(1.0, abs(before))

    def test_isotropic_shift_is_invisible(self, rng):
        _, X2 = random_instance(rng, m=5, l=2)
        state = EwcState(3.0 * np.eye(5), random_orthonormal(rng, 5, 2), 1.0, 1e-3)
        P = random_orthonormal(rng, 5, 2)
        np.testing.assert_allclose(dc_step(state, X2, P, True), dc_step(state, X2, P, False), atol=1e-10)

    def test_shape_check(self, rng):
        state, X2 = random_instance(rng, m=5, l=2)
        with pytest.raises(DimensionMismatch):
            dc_step(state, X2, random_orthonormal(rng, 5, 3))


class TestSolve:
    def test_same_mode_stays_close(self):
        X = generate_block(1, 1000, 5)
        Xs = apply_scaler(fit_scaler(X), X)
        pca = fit_pca(Xs, 0.999)
        state = initial_state(fisher_matrix(Xs), pca.loadings)
        Y = generate_block(1, 1000, 6)
        sol = solve(state, apply_scaler(fit_scaler(Y), Y))
        assert sol.converged
        assert sol.iterations <= 10
        assert np.linalg.norm(sol.loadings - state.anchor) <= 0.5

    @pytest.mark.parametrize("seed", range(5))
    def test_zero_weight_gives_plain_pca(self, seed):
        rng = np.random.default_rng(seed)
        state, X2 = random_instance(rng, lam=0.0)
        state = EwcState(0.5e-8 * np.eye(state.omega.shape[0]), state.anchor, 0.0, 1e-8)
        sol = solve(state, X2)
        ref = fit_pca(X2, n_components=state.anchor.shape[1]).loadings
        assert max_principal_angle(sol.loadings, ref) < 1e-3

    @pytest.mark.parametrize("seed", range(5))
    def test_large_weight_retains_anchor(self, seed):
        rng = np.random.default_rng(seed)
        state, X2 = random_instance(rng, lam=1e8 * 200)
        sol = solve(state, X2)
        assert np.linalg.norm(sol.loadings - state.anchor) < 1e-3

    @pytest.mark.parametrize("refine", [True, False])
    def test_trace_is_monotone(self, rng, refine):
        state, X2 = random_instance(rng, m=8, l=3, lam=50.0)
        sol = solve(state, X2, DcConfig(record_trace=True, refine=refine))
        tr = np.array(sol.objective_trace)
        assert tr[0] == pytest.approx(objective(state.anchor, X2, state))
        assert np.all(np.diff(tr) <= 1e-9 * max(1.0, abs(tr[0])))
        assert len(sol.step_norms) == len(tr) - 1

    def test_refinement_reaches_stationarity(self, rng):
        state, X2 = random_instance(rng, m=8, l=3, lam=1e4)
        crude = solve(state, X2, DcConfig(refine=False))
        fine = solve(state, X2)
        assert fine.converged
        assert objective(fine.loadings, X2, state) <= objective(crude.loadings, X2, state) + 1e-9
        g = np.linalg.norm(riemannian_gradient(fine.loadings, state, X2.T @ X2))
        assert g < 1e-6 * np.linalg.norm(state.omega, 2)
        assert fine.grad_norm == pytest.approx(g, rel=1e-6, abs=1e-12)

    def test_iteration_cap(self, rng):
        state, X2 = random_instance(rng, m=8, l=3, lam=1e4)
        sol = solve(state, X2, DcConfig(epsilon=1e-300, max_iters=3, refine=False))
        assert sol.iterations == 3 and not sol.converged

    def test_trace_csv(self, rng, tmp_path):
        state, X2 = random_instance(rng, m=5, l=2)
        sol = solve(state, X2, DcConfig(record_trace=True))
        p = tmp_path / "trace.csv"
        sol.write_trace_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "iter,objective,step_norm"
        assert len(lines) == len(sol.objective_trace) + 1

    @pytest.mark.parametrize("kw", [{"epsilon": 0.0}, {"max_iters": 0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            DcConfig(**kw)
