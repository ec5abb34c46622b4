"""Convergence diagnostics: stochastic greedy condition numbers, the expected
contraction bound, empirical rates and dense-Newton reference solutions.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateMatrixError,
    EvaluationError,
    HypothesisViolation,
    InsufficientDataError,
    NoReferenceError,
    ParameterError,
)
from .selection import greedy_top_beta, sample_control

RANK_CUTOFF = 1e-12
DEFAULT_BUDGET = 10_000


def submatrix_condition(block_jacobian):
    """sigma_max / sigma_min over the nonzero singular values.

    Singular values below ``RANK_CUTOFF * sigma_max`` count as zero.
    """
    s = np.linalg.svd(np.atleast_2d(block_jacobian), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        raise DegenerateMatrixError("matrix is identically zero")
    nonzero = s[s > RANK_CUTOFF * s[0]]
    return float(s[0] / nonzero[-1])


@dataclass(frozen=True)
class SgcnEstimate:
    value: float
    mode: str  # "exact" or "monte-carlo"
    samples_used: int
    worst_block: tuple


def _block_condition(problem, x, block, cache):
    if block not in cache:
        try:
            cache[block] = submatrix_condition(problem.jacobian_block(x, list(block)))
        except DegenerateMatrixError as exc:
            raise DegenerateMatrixError(f"degenerate block {block}", block=block) from exc
    return cache[block]


def estimate_sgcn(problem, x, alpha, beta, budget=DEFAULT_BUDGET, rng=None):
    """Stochastic greedy condition number of the Jacobian at ``x``.

    The maximum of cond(J_I) over all blocks I reachable by drawing ``alpha``
    rows uniformly and keeping the ``beta`` with largest |F_i(x)|. When there
    are at most ``budget`` control sets they are all enumerated and the value
    is exact; otherwise ``budget`` control sets are sampled and the value is a
    lower bound.
    """
    m = problem.m
    if not 1 <= beta <= alpha <= m:
        raise ParameterError(f"need 1 <= beta <= alpha <= m, got {beta}, {alpha}, {m}")
    abs_r = np.abs(problem.residual(x))
    total = math.comb(m, alpha)
    cache = {}
    if total <= budget:
        controls = itertools.combinations(range(m), alpha)
        mode, used = "exact", total
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        controls = (sample_control(m, alpha, rng) for _ in range(budget))
        mode, used = "monte-carlo", budget

    worst, worst_block = -np.inf, None
    for control in controls:
        block = tuple(greedy_top_beta(abs_r, control, beta).tolist())
        kappa = _block_condition(problem, x, block, cache)
        if kappa > worst:
            worst, worst_block = kappa, block
    return SgcnEstimate(worst, mode, used, worst_block)


@dataclass(frozen=True)
class RateBoundInputs:
    kappa: float
    gamma: float
    eta: float = 0.0


def rate_bound(inputs):
    """Expected squared-error contraction factor

        rho = 1 - (2 gamma (1 - eta) - gamma^2) / ((1 + eta^2) kappa^2)

    valid for eta in [0, 1/2) and gamma in (0, 2 (1 - eta)).
    """
    kappa, gamma, eta = inputs.kappa, inputs.gamma, inputs.eta
    if not 0.0 <= eta < 0.5:
        raise HypothesisViolation(f"eta must lie in [0, 0.5), got {eta}")
    if not 0.0 < gamma < 2.0 * (1.0 - eta):
        raise HypothesisViolation(
            f"gamma={gamma} outside (0, {2.0 * (1.0 - eta):g}); the bound is vacuous there")
    if not kappa >= 1.0:
        raise HypothesisViolation(f"kappa must be >= 1, got {kappa}")
    return 1.0 - (2.0 * gamma * (1.0 - eta) - gamma**2) / ((1.0 + eta**2) * kappa**2)


def optimal_gamma(eta):
    """Return ``(gamma_star, factor)`` with gamma_star = 1 - eta and rho* = 1 - factor / kappa^2."""
    if not 0.0 <= eta < 0.5:
        raise HypothesisViolation(f"eta must lie in [0, 0.5), got {eta}")
    return 1.0 - eta, (1.0 - eta) ** 2 / (1.0 + eta**2)


def empirical_rate(error_history):
    """Geometric-mean per-step ratio (e_K / e_1)^(1 / (K - 1)).

    Trailing entries below 100 * machine epsilon are dropped first, since once
    an iterate has hit round-off the ratios carry no information.
    """
    e = np.asarray(error_history, dtype=float)
    floor = 100 * np.finfo(float).eps
    above = np.flatnonzero(e >= floor)
    e = e[: above[-1] + 1] if above.size else e[:0]
    if e.size < 5:
        raise InsufficientDataError(f"need at least 5 usable entries, got {e.size}")
    if not (e > 0).all():
        raise InsufficientDataError("error history must be strictly positive")
    return float((e[-1] / e[0]) ** (1.0 / (e.size - 1)))


def reference_solution(problem, x0, max_iterations=100):
    """Dense Newton iteration with LU solves, for error tracking at desk scale.

    Stops when ||F(x)|| <= 1e-12 (1 + ||F(x0)||). Raises NoReferenceError when
    the Jacobian is singular or the tolerance is not met.
    """
    if problem.m != problem.n:
        raise NoReferenceError("reference solutions need a square system")
    if problem.m > 5000:
        raise NoReferenceError(f"m={problem.m} is too large for a dense Newton solve")
    x = np.array(x0, dtype=float)
    try:
        f = problem.residual(x)
        tol = 1e-12 * (1.0 + np.linalg.norm(f))
        for _ in range(max_iterations):
            if np.linalg.norm(f) <= tol:
                return x
            J = problem.jacobian(x)
            x = x - scipy.linalg.solve(J, f, check_finite=True)
            f = problem.residual(x)
    except (np.linalg.LinAlgError, ValueError, EvaluationError) as exc:
        raise NoReferenceError(f"Newton iteration failed: {exc}") from exc
    if np.linalg.norm(f) <= tol:
        return x
    raise NoReferenceError(f"Newton did not converge in {max_iterations} iterations")


def squared_error_rate(report, max_len=None):
    """Empirical per-iteration contraction of ||x_k - x*||^2 from a solve report."""
    e = report.error_norms
    if np.isnan(e).any():
        raise InsufficientDataError("report carries no error norms; pass x_ref to solve")
    e = e**2
    if max_len is not None:
        e = e[:max_len]
    return empirical_rate(e)
