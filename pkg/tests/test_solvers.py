import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgfbk.errors import (
    DegenerateDirectionError,
    DegenerateRowError,
    DomainError,
    NumericError,
    ParameterError,
    SolveAbortedError,
    StagnationError,
)
from rgfbk.problems import BroydenTridiagonal, Chandrasekhar, LinearSystem, NonlinearSystem, random_linear
from rgfbk.solvers import (
    METHODS,
    SolverConfig,
    block_pinv_step,
    gaussian_weight,
    nk_step,
    residual_weight,
    rgfbk_step,
    solve,
    stopping_threshold,
)


@pytest.mark.parametrize("r0, expected", [(0.0, 1e-6), (100.0, 2e-6), (1.0, 1.01e-6)])
def test_stopping_threshold(r0, expected):
    assert stopping_threshold(r0) == pytest.approx(expected, rel=1e-15)


def test_residual_weight_is_identity():
    v = np.array([1.0, -2.0])
    np.testing.assert_array_equal(residual_weight(v), [1.0, -2.0])
    np.testing.assert_array_equal(residual_weight(np.zeros(3)), np.zeros(3))


def test_gaussian_weight():
    a = gaussian_weight(3, np.random.default_rng(9))
    b = gaussian_weight(3, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (3,) and np.isfinite(a).all()
    rng = np.random.default_rng(10)
    draws = np.array([gaussian_weight(1, rng)[0] for _ in range(100_000)])
    assert abs(draws.mean()) <= 0.02
    assert abs(draws.var() - 1.0) <= 0.02


def test_rgfbk_step_single_row():
    x = rgfbk_step(np.zeros(2), np.array([1.0]), np.array([[1.0, 0.0]]), np.array([1.0]), 1.0)
    np.testing.assert_array_equal(x, [-1.0, 0.0])
    x = rgfbk_step(np.zeros(2), np.array([1.0]), np.array([[1.0, 0.0]]), np.array([1.0]), 0.5)
    np.testing.assert_array_equal(x, [-0.5, 0.0])


def test_rgfbk_step_two_rows():
    # w^T F = 2, J^T w = (1, 1), squared norm 2
    x = rgfbk_step(np.zeros(2), np.ones(2), np.eye(2), np.ones(2), 1.0)
    np.testing.assert_array_equal(x, [-1.0, -1.0])


def test_rgfbk_step_degenerate_direction():
    with pytest.raises(DegenerateDirectionError):
        rgfbk_step(np.zeros(2), np.zeros(2), np.eye(2), np.zeros(2), 1.0)
    with pytest.raises(DegenerateDirectionError):
        rgfbk_step(np.zeros(2), np.ones(2), np.array([[1.0, 0.0], [-1.0, 0.0]]), np.ones(2), 1.0)


def random_block(rng, beta, n):
    return rng.standard_normal(beta), rng.standard_normal((beta, n)), rng.standard_normal(beta)


@pytest.mark.parametrize("beta", [1, 3, 10])
@pytest.mark.parametrize("n", [5, 50])
def test_weighted_orthogonality_at_unit_gamma(beta, n):
    rng = np.random.default_rng(beta * 100 + n)
    for _ in range(50):
        F, J, w = random_block(rng, beta, n)
        x = rng.standard_normal(n)
        d = rgfbk_step(x, F, J, w, 1.0) - x
        assert abs(w @ (F + J @ d)) <= 1e-10 * (1 + abs(w @ F))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), scale=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_step_is_scale_invariant_in_weight(seed, scale):
    rng = np.random.default_rng(seed)
    F, J, w = random_block(rng, 4, 6)
    x = rng.standard_normal(6)
    a = rgfbk_step(x, F, J, w, 1.3)
    b = rgfbk_step(x, F, J, scale * w, 1.3)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_nk_step_examples():
    np.testing.assert_array_equal(nk_step(np.zeros(2), 2.0, np.array([2.0, 0.0])), [-1.0, 0.0])
    np.testing.assert_array_equal(nk_step(np.array([3.0, 4.0]), 0.0, np.array([1.0, 1.0])), [3.0, 4.0])
    np.testing.assert_array_equal(nk_step(np.zeros(2), 3.0, np.array([0.0, 1.0])), [0.0, -3.0])
    with pytest.raises(DegenerateRowError):
        nk_step(np.zeros(2), 1.0, np.zeros(2))


def test_nk_step_zeroes_linearized_row():
    rng = np.random.default_rng(4)
    for _ in range(100):
        x, g = rng.standard_normal(7), rng.standard_normal(7)
        f = rng.standard_normal()
        assert abs(f + g @ (nk_step(x, f, g) - x)) <= 1e-12 * (1 + abs(f))


def test_rgfbk_reduces_to_nk_for_single_row():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        x, g = rng.standard_normal(n), rng.standard_normal(n)
        f = rng.standard_normal()
        a = rgfbk_step(x, np.array([f]), g[None, :], residual_weight(np.array([f])), 1.0)
        b = nk_step(x, f, g)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14 * np.abs(b).max())


def test_block_pinv_examples():
    np.testing.assert_allclose(block_pinv_step(np.zeros(2), np.array([3.0, 4.0]), np.eye(2)), [-3.0, -4.0])
    np.testing.assert_allclose(block_pinv_step(np.zeros(2), np.array([2.0]), np.array([[1.0, 0.0]])),
                               [-2.0, 0.0])
    np.testing.assert_allclose(
        block_pinv_step(np.zeros(2), np.array([1.0, 1.0]), np.array([[1.0, 0.0], [1.0, 0.0]])),
        [-1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("shape, rank", [((3, 8), 3), ((6, 4), 4), ((5, 5), 2)])
def test_block_pinv_matches_svd_pseudoinverse(shape, rank):
    rng = np.random.default_rng(sum(shape) + rank)
    J = rng.standard_normal((shape[0], rank)) @ rng.standard_normal((rank, shape[1]))
    F = rng.standard_normal(shape[0])
    x = rng.standard_normal(shape[1])
    expected = x - np.linalg.pinv(J) @ F
    np.testing.assert_allclose(block_pinv_step(x, F, J), expected, rtol=1e-9, atol=1e-10)


def test_block_pinv_one_step_on_square_system():
    rng = np.random.default_rng(20)
    A = rng.standard_normal((20, 20))
    p = LinearSystem(A, rng.standard_normal(20))
    x0 = np.zeros(20)
    x1 = block_pinv_step(x0, p.residual(x0), p.jacobian(x0))
    assert np.linalg.norm(p.residual(x1)) <= 1e-10


def test_block_pinv_non_finite():
    with pytest.raises(NumericError):
        block_pinv_step(np.zeros(2), np.array([1.0]), np.array([[np.nan, 1.0]]))


# --- configuration ---------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"method": "newton"},
    {"gamma": 0.0},
    {"gamma": 2.0},
    {"gamma": 2.5},
    {"alpha": 3, "beta": 4},
    {"alpha": 0},
    {"weight_rule": "uniform"},
    {"residual_tolerance": -1.0},
    {"max_iterations": 0},
])
def test_config_rejects(kwargs):
    with pytest.raises(ParameterError):
        SolverConfig(**kwargs)


def test_config_default_parameters():
    cfg = SolverConfig().resolve(2000)
    assert (cfg.alpha, cfg.beta, cfg.gamma) == (1500, 750, 1.2)
    assert SolverConfig().resolve(1).alpha == 1
    with pytest.raises(ParameterError):
        SolverConfig(alpha=10).resolve(5)


# --- solve loop --------------------------------------------------------------

def test_identity_system_full_block_one_iteration():
    p = LinearSystem(np.eye(3), [1.0, 2.0, 3.0])
    rep = solve(p, SolverConfig(alpha=3, beta=3, gamma=1.0), np.zeros(3))
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(rep.final_x, [1.0, 2.0, 3.0], rtol=1e-15)


def test_already_converged_start():
    p = LinearSystem(np.eye(2), [1.0, 1.0])
    rep = solve(p, SolverConfig(), np.ones(2))
    assert rep.converged and rep.iterations == 0 and len(rep.history) == 1


@pytest.mark.parametrize("method", METHODS)
def test_every_method_solves_small_chandrasekhar(method):
    p = Chandrasekhar(40)
    rep = solve(p, SolverConfig(method=method, seed=3), np.zeros(40))
    assert rep.converged
    assert rep.final_residual <= rep.threshold_used
    assert len(rep.history) == rep.iterations + 1
    # recomputed residual agrees with the bookkeeping
    assert np.linalg.norm(p.residual(rep.final_x)) <= 2 * rep.threshold_used


@pytest.mark.parametrize("method", METHODS)
def test_every_method_solves_small_broyden(method):
    p = BroydenTridiagonal(30)
    rep = solve(p, SolverConfig(method=method, seed=5), -np.ones(30))
    assert rep.converged


def test_gaussian_weights_converge_on_linear_system():
    p, x_star = random_linear(60, 20, cond=5.0, seed=2)
    rep = solve(p, SolverConfig(weight_rule="gaussian", gamma=1.0, seed=1), np.zeros(20), x_ref=x_star)
    assert rep.converged
    assert rep.history[-1].error_norm < 1e-5


def test_iteration_cap():
    p = Chandrasekhar(100)
    rep = solve(p, SolverConfig(method="nk-uniform", max_iterations=7), np.zeros(100))
    assert not rep.converged
    assert rep.iterations == 7 and len(rep.history) == 8


def test_explicit_tolerance():
    p = Chandrasekhar(50)
    rep = solve(p, SolverConfig(residual_tolerance=1e-3), np.zeros(50))
    assert rep.threshold_used == 1e-3
    assert rep.final_residual <= 1e-3
    assert rep.history[-2].residual_norm > 1e-3


@pytest.mark.parametrize("method", ["rgfbk", "mr-bsnk-style", "nk-uniform"])
def test_seeded_reproducibility(method):
    p = BroydenTridiagonal(60)
    cfg = SolverConfig(method=method, seed=2**63 + 5, max_iterations=300)
    a = solve(p, cfg, -np.ones(60))
    b = solve(p, cfg, -np.ones(60))
    np.testing.assert_array_equal(a.residual_norms, b.residual_norms)
    np.testing.assert_array_equal(a.final_x, b.final_x)
    for ra, rb in zip(a.history[1:], b.history[1:]):
        np.testing.assert_array_equal(ra.block, rb.block)


def test_rgfbk_blocks_have_size_beta():
    p = Chandrasekhar(80)
    rep = solve(p, SolverConfig(alpha=30, beta=11, seed=0), np.zeros(80))
    assert all(rec.block.size == 11 for rec in rep.history[1:])


def test_error_norms_tracked():
    p, x_star = random_linear(40, 10, seed=3)
    rep = solve(p, SolverConfig(gamma=1.0), np.zeros(10), x_ref=x_star)
    assert rep.history[0].error_norm == pytest.approx(np.linalg.norm(x_star))
    assert rep.error_norms[-1] < 1e-5
    no_ref = solve(p, SolverConfig(gamma=1.0), np.zeros(10))
    assert no_ref.history[0].error_norm is None


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
def test_error_never_increases_on_linear_systems(gamma):
    p, x_star = random_linear(100, 50, cond=10.0, seed=7)
    for seed in range(3):
        rep = solve(p, SolverConfig(gamma=gamma, seed=seed, max_iterations=2000), np.zeros(50),
                    x_ref=x_star)
        assert np.all(np.diff(rep.error_norms) <= 1e-12)


class ZeroRows(NonlinearSystem):
    """F_i = 0 for i < 8 and F_i = x_0 - 1 for the rest."""

    def __init__(self):
        super().__init__(10, 1)

    def _residual(self, x):
        f = np.zeros(10)
        f[8:] = x[0] - 1.0
        return f

    def _jacobian_block(self, x, idx):
        return (idx >= 8).astype(float)[:, None]


def test_zero_block_triggers_resampling():
    # alpha = 1: most draws land on a satisfied row and must be redrawn
    rep = solve(ZeroRows(), SolverConfig(alpha=1, beta=1, gamma=1.0, seed=0), np.zeros(1))
    assert rep.converged
    assert all(rec.block[0] >= 8 for rec in rep.history[1:])


class AllFlat(NonlinearSystem):
    def __init__(self):
        super().__init__(3, 2)

    def _residual(self, x):
        return np.ones(3)

    def _jacobian_block(self, x, idx):
        return np.zeros((idx.size, 2))


@pytest.mark.parametrize("method", ["rgfbk", "nk-uniform"])
def test_stagnation_after_repeated_degenerate_blocks(method):
    with pytest.raises(StagnationError) as info:
        solve(AllFlat(), SolverConfig(method=method), np.zeros(2))
    assert info.value.k == 0


def test_domain_error_aborts_with_diagnostics():
    p = Chandrasekhar(1, c=1.0)
    with pytest.raises(SolveAbortedError) as info:
        solve(p, SolverConfig(), np.array([4.0]))
    assert info.value.k == 0
    assert isinstance(info.value.__cause__, DomainError)


def test_bad_initial_point():
    p = BroydenTridiagonal(4)
    with pytest.raises(ParameterError):
        solve(p, SolverConfig(), np.zeros(3))
    with pytest.raises(ParameterError):
        solve(p, SolverConfig(), np.array([0.0, np.nan, 0.0, 0.0]))
