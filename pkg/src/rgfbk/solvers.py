"""Kaczmarz-type solvers for F(x) = 0.

Methods
-------
rgfbk
    Random greedy fast block Kaczmarz: sample ``alpha`` rows uniformly, keep the
    ``beta`` with largest |F_i|, then take a pseudoinverse-free step along
    J_I^T w that minimizes the weighted linearized residual (w^T (F_I + J_I d))^2.
nk-uniform
    Single-row nonlinear Kaczmarz with a uniformly random row.
block-pinv-capped
    Capped greedy rows plus a minimum-norm least-squares (pseudoinverse) step.
mr-bsnk-style, md-bsnk-style
    Simplified sample-then-greedy pseudoinverse baselines using the max
    residual and max distance scores. These are not the published algorithms.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import selection
from .errors import (
    DegenerateDirectionError,
    DegenerateError,
    DegenerateRowError,
    EvaluationError,
    NumericError,
    ParameterError,
    SolveAbortedError,
    StagnationError,
)

METHODS = ("rgfbk", "nk-uniform", "block-pinv-capped", "mr-bsnk-style", "md-bsnk-style")
WEIGHT_RULES = ("residual", "gaussian")
SAMPLED_METHODS = ("rgfbk", "mr-bsnk-style", "md-bsnk-style")

MAX_RESAMPLES = 10
_TINY_DIRECTION = 1e-300
# below this reciprocal condition estimate the QR fast path is not trusted
_QR_RCOND = 1e-10


def default_alpha(m):
    return max(1, math.floor(0.75 * m))


def default_beta(alpha):
    return max(1, math.floor(0.5 * alpha))


@dataclass(frozen=True)
class SolverConfig:
    """Method name and parameters for one solve.

    ``alpha``/``beta`` left as None are filled in by :meth:`resolve` with
    floor(0.75 m) and floor(0.5 alpha). ``gamma`` is the relaxation factor of
    the rgfbk step; the pseudoinverse and single-row baselines ignore it.
    """

    method: str = "rgfbk"
    alpha: int | None = None
    beta: int | None = None
    gamma: float = 1.2
    weight_rule: str = "residual"
    max_iterations: int = 100_000
    residual_tolerance: float | str = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.weight_rule not in WEIGHT_RULES:
            raise ParameterError(f"unknown weight rule {self.weight_rule!r}")
        if not 0.0 < self.gamma < 2.0:
            raise ParameterError(f"gamma must lie in (0, 2), got {self.gamma}")
        if self.alpha is not None and self.alpha < 1:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.beta is not None and self.beta < 1:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.alpha is not None and self.beta is not None and self.beta > self.alpha:
            raise ParameterError(f"beta={self.beta} exceeds alpha={self.alpha}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        tol = self.residual_tolerance
        if tol != "auto" and not (isinstance(tol, (int, float)) and tol >= 0):
            raise ParameterError(f"residual_tolerance must be 'auto' or >= 0, got {tol!r}")

    def resolve(self, m):
        """Return a copy with concrete alpha and beta for a problem with m rows."""
        alpha = self.alpha if self.alpha is not None else default_alpha(m)
        beta = self.beta if self.beta is not None else default_beta(alpha)
        if self.method in SAMPLED_METHODS and not 1 <= beta <= alpha <= m:
            raise ParameterError(f"need 1 <= beta <= alpha <= m, got beta={beta}, alpha={alpha}, m={m}")
        return replace(self, alpha=alpha, beta=beta)


@dataclass
class IterationRecord:
    k: int
    residual_norm: float
    block: np.ndarray | None = None
    error_norm: float | None = None


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    elapsed_seconds: float
    final_x: np.ndarray
    threshold_used: float
    history: list = field(default_factory=list)
    config: SolverConfig | None = None

    @property
    def residual_norms(self):
        return np.array([rec.residual_norm for rec in self.history])

    @property
    def error_norms(self):
        return np.array([rec.error_norm for rec in self.history], dtype=float)

    @property
    def final_residual(self):
        return self.history[-1].residual_norm


def stopping_threshold(r0_norm):
    """RES = 1e-6 + 1e-8 * ||r_0||."""
    return 1e-6 + 1e-8 * r0_norm


def residual_weight(block_residual):
    return block_residual


def gaussian_weight(size, rng):
    return rng.standard_normal(size)


def rgfbk_step(x, block_residual, block_jacobian, weight, gamma):
    """Pseudoinverse-free block update.

    x' = x - gamma * (w^T F_I) / ||J_I^T w||^2 * J_I^T w

    At gamma = 1 this is the exact minimizer of (w^T (F_I + J_I (x' - x)))^2
    along the direction J_I^T w. Costs two products with the block.
    """
    direction = block_jacobian.T @ weight
    dd = direction @ direction
    if not dd >= _TINY_DIRECTION:
        raise DegenerateDirectionError(f"||J_I^T w||^2 = {dd:.3g} is too small for a step")
    return x - (gamma * (weight @ block_residual) / dd) * direction


def nk_step(x, f_i, grad_i):
    """Single-row nonlinear Kaczmarz projection x - f_i / ||grad_i||^2 * grad_i."""
    gg = grad_i @ grad_i
    if gg == 0.0:
        raise DegenerateRowError("gradient row vanishes")
    return x - (f_i / gg) * grad_i


def block_pinv_step(x, block_residual, block_jacobian):
    """x - pinv(J_I) F_I without forming the pseudoinverse.

    A wide block with well-conditioned rows takes the minimum-norm solution
    from a thin QR factorization of J_I^T. Anything else (tall, rank
    deficient or ill conditioned) goes through a complete orthogonal
    factorization.
    """
    rows, cols = block_jacobian.shape
    try:
        if rows <= cols:
            Q, R = scipy.linalg.qr(block_jacobian.T, mode="economic")
            rcond, info = scipy.linalg.lapack.dtrcon(R, norm="1", uplo="U")
            if info == 0 and rcond > _QR_RCOND:
                y = scipy.linalg.solve_triangular(R, block_residual, trans="T")
                return x - Q @ y
        d = scipy.linalg.lstsq(block_jacobian, block_residual, lapack_driver="gelsy")[0]
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericError(f"least-squares factorization failed: {exc}") from exc
    return x - d


def _propose(problem, config, x, r, abs_r, rng):
    """One candidate iterate and the block it used. May raise DegenerateError."""
    m = problem.m
    method = config.method
    if method == "rgfbk":
        control = selection.sample_control(m, config.alpha, rng)
        block = selection.greedy_top_beta(abs_r, control, config.beta)
        f_block = r[block]
        J = problem.jacobian_block(x, block)
        if config.weight_rule == "residual":
            w = residual_weight(f_block)
        else:
            w = gaussian_weight(block.size, rng)
        return rgfbk_step(x, f_block, J, w, config.gamma), block
    if method == "nk-uniform":
        i = int(rng.integers(m))
        grad = problem.jacobian_block(x, [i])[0]
        return nk_step(x, r[i], grad), np.array([i])
    if method == "block-pinv-capped":
        block = selection.capped_set(abs_r)
    elif method == "mr-bsnk-style":
        control = selection.sample_control(m, config.alpha, rng)
        block = selection.max_residual_from_sample(abs_r, control, config.beta)
    else:
        control = selection.sample_control(m, config.alpha, rng)
        J_control = problem.jacobian_block(x, control)
        norms = np.full(m, np.nan)
        norms[control] = np.linalg.norm(J_control, axis=1)
        block = selection.max_distance_from_sample(abs_r, norms, control, config.beta)
    f_block = r[block]
    if not f_block.any():
        raise DegenerateDirectionError("selected block has zero residual")
    J = problem.jacobian_block(x, block)
    return block_pinv_step(x, f_block, J), block


def solve(problem, config, x0, x_ref=None):
    """Run ``config.method`` from ``x0`` until ||F(x_k)|| <= RES or the iteration cap.

    Every iteration, including k = 0, is recorded in the report's history.
    A degenerate candidate step (zero block residual, zero direction or zero
    gradient row) is redrawn with fresh randomness up to ``MAX_RESAMPLES``
    times before a StagnationError is raised.
    """
    config = config.resolve(problem.m)
    rng = np.random.default_rng(config.seed)
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape != (problem.n,):
        raise ParameterError(f"x0 must have length {problem.n}, got {x.size}")
    if not np.isfinite(x).all():
        raise ParameterError("x0 must be finite")
    if x_ref is not None:
        x_ref = np.asarray(x_ref, dtype=float)

    def error_of(z):
        return None if x_ref is None else float(np.linalg.norm(z - x_ref))

    k = 0
    start = time.perf_counter()
    try:
        r = problem.residual(x)
    except EvaluationError as exc:
        raise SolveAbortedError(f"evaluation failed at k=0: {exc}", k=0, x=x) from exc
    r_norm = float(np.linalg.norm(r))
    if config.residual_tolerance == "auto":
        threshold = stopping_threshold(r_norm)
    else:
        threshold = float(config.residual_tolerance)
    history = [IterationRecord(0, r_norm, None, error_of(x))]

    while r_norm > threshold and k < config.max_iterations:
        abs_r = np.abs(r)
        for _ in range(MAX_RESAMPLES + 1):
            try:
                x_new, block = _propose(problem, config, x, r, abs_r, rng)
                break
            except DegenerateError:
                continue
            except EvaluationError as exc:
                raise SolveAbortedError(f"evaluation failed at k={k}: {exc}", k=k, x=x) from exc
        else:
            raise StagnationError(
                f"{MAX_RESAMPLES + 1} consecutive degenerate blocks at k={k}", k=k, x=x)
        x = x_new
        k += 1
        try:
            r = problem.residual(x)
        except EvaluationError as exc:
            raise SolveAbortedError(f"evaluation failed at k={k}: {exc}", k=k, x=x) from exc
        r_norm = float(np.linalg.norm(r))
        history.append(IterationRecord(k, r_norm, block, error_of(x)))

    elapsed = time.perf_counter() - start
    return SolveReport(
        converged=r_norm <= threshold,
        iterations=k,
        elapsed_seconds=elapsed,
        final_x=x,
        threshold_used=threshold,
        history=history,
        config=config,
    )
