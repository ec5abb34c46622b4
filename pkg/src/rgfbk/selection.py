"""Row-selection rules for block Kaczmarz iterations.

A control set is an integer array of distinct row indices drawn without
replacement; a block is the sorted integer array of rows actually used in the
update. Selection rules never evaluate F: the caller passes |F(x_k)| in.
Ties between equal scores are broken toward the smaller row index.
"""

import itertools

import numpy as np

from .errors import AlreadyConverged, DegenerateRowError, ParameterError


def sample_control(m, alpha, rng):
    """Draw ``alpha`` distinct indices from range(m) by a partial Fisher-Yates shuffle.

    Every alpha-subset is equally likely. The stream consumption depends only
    on ``(m, alpha)``: exactly ``alpha`` bounded integers are drawn.
    """
    if not 1 <= alpha <= m:
        raise ParameterError(f"alpha must satisfy 1 <= alpha <= m={m}, got {alpha}")
    perm = np.arange(m)
    swaps = rng.integers(np.arange(alpha), m)
    for t, j in enumerate(swaps.tolist()):
        perm[t], perm[j] = perm[j], perm[t]
    return perm[:alpha].copy()


def _top_by_score(scores, control, beta):
    control = np.asarray(control, dtype=np.intp)
    if not 1 <= beta <= control.size:
        raise ParameterError(f"beta must satisfy 1 <= beta <= alpha={control.size}, got {beta}")
    if beta == control.size:
        return np.sort(control)
    # primary key: score descending; secondary key: index ascending
    order = np.lexsort((control, -scores))
    return np.sort(control[order[:beta]])


def greedy_top_beta(abs_residuals, control, beta):
    """The ``beta`` control indices with the largest absolute residuals, sorted."""
    abs_residuals = np.asarray(abs_residuals, dtype=float)
    control = np.asarray(control, dtype=np.intp)
    return _top_by_score(abs_residuals[control], control, beta)


def max_residual_from_sample(abs_residuals, control, beta):
    """Sample-then-max-residual baseline rule (same contract as greedy_top_beta)."""
    return greedy_top_beta(abs_residuals, control, beta)


def max_distance_from_sample(abs_residuals, row_norms, control, beta):
    """Sample-then-max-distance baseline rule.

    The score of row i is |F_i| / ||grad F_i||, the length of a single-row
    Kaczmarz projection onto that row's linearization.
    """
    abs_residuals = np.asarray(abs_residuals, dtype=float)
    row_norms = np.asarray(row_norms, dtype=float)
    control = np.asarray(control, dtype=np.intp)
    norms = row_norms[control]
    bad = ~(norms > 0)
    if bad.any():
        i = int(control[np.flatnonzero(bad)[0]])
        raise DegenerateRowError(f"row {i} has zero gradient norm", index=i)
    return _top_by_score(abs_residuals[control] / norms, control, beta)


def capped_set(abs_residuals):
    """All rows whose squared residual reaches the capped threshold.

    The threshold is delta * ||f||^2 with
    delta = (max_i f_i^2 / ||f||^2 + 1/m) / 2, which never exceeds max_i f_i^2,
    so the largest residual is always selected.
    """
    sq = np.square(np.asarray(abs_residuals, dtype=float))
    total = sq.sum()
    if total == 0.0:
        raise AlreadyConverged("residual vector is identically zero")
    top = sq.max()
    # clamp guards the argmax against rounding in total / m
    threshold = min(0.5 * (top + total / sq.size), top)
    return np.flatnonzero(sq >= threshold)


def realizations(abs_residuals, alpha, beta):
    """Every distinct block the sample-then-greedy rule can produce, by enumeration."""
    m = len(abs_residuals)
    if not 1 <= beta <= alpha <= m:
        raise ParameterError(f"need 1 <= beta <= alpha <= m, got {beta}, {alpha}, {m}")
    blocks = set()
    for control in itertools.combinations(range(m), alpha):
        blocks.add(tuple(greedy_top_beta(abs_residuals, control, beta).tolist()))
    return blocks
