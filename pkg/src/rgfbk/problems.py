"""Nonlinear systems F(x) = 0 with row-wise Jacobian access.

All indices are 0-based. A problem exposes its full residual, the residual
restricted to an index set, and the corresponding rows of the Jacobian, which
is everything a row-action method needs.
"""

import numpy as np

from .errors import DomainError, EvaluationError, ParameterError

# Chandrasekhar kernels up to this many entries are stored densely (64 MiB).
_DENSE_KERNEL_LIMIT = 1 << 23
_ROW_CHUNK = 512


def _check_finite(values, what):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"{what} is not finite at index {i}", index=i)
    return values


class NonlinearSystem:
    """Base class for a map F: R^n -> R^m.

    Subclasses implement ``_residual``, ``_residual_block`` and
    ``_jacobian_block``; the public methods validate shapes and check the
    output for non-finite entries.
    """

    name = "nonlinear"

    def __init__(self, m, n):
        if m < 1 or n < 1:
            raise ParameterError(f"dimensions must be positive, got m={m}, n={n}")
        self.m = int(m)
        self.n = int(n)

    def _as_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ParameterError(f"x must have shape ({self.n},), got {x.shape}")
        return x

    def _as_index(self, idx):
        idx = np.asarray(idx, dtype=np.intp).reshape(-1)
        if idx.size == 0:
            raise ParameterError("index set is empty")
        if idx.min() < 0 or idx.max() >= self.m:
            raise ParameterError(f"index set must lie in [0, {self.m})")
        return idx

    def residual(self, x):
        """Return F(x) as a vector of length m."""
        x = self._as_point(x)
        return _check_finite(self._residual(x), "residual")

    def residual_block(self, x, idx):
        """Return F_I(x) for the index set ``idx``."""
        x = self._as_point(x)
        idx = self._as_index(idx)
        return _check_finite(self._residual_block(x, idx), "block residual")

    def jacobian_block(self, x, idx):
        """Return the |I| x n matrix whose rows are the gradients of F_i, i in I."""
        x = self._as_point(x)
        idx = self._as_index(idx)
        return _check_finite(self._jacobian_block(x, idx).reshape(idx.size, self.n),
                             "Jacobian block")

    def jacobian(self, x):
        return self.jacobian_block(x, np.arange(self.m))

    def _residual_block(self, x, idx):
        return self._residual(x)[idx]

    def _residual(self, x):
        raise NotImplementedError

    def _jacobian_block(self, x, idx):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, n={self.n})"


def evaluate(problem, x, idx=None):
    """Evaluate F(x), or F_I(x) when ``idx`` is given."""
    if idx is None:
        return problem.residual(x)
    return problem.residual_block(x, idx)


def jacobian_block(problem, x, idx):
    return problem.jacobian_block(x, idx)


class Chandrasekhar(NonlinearSystem):
    """Midpoint-rule discretization of the Chandrasekhar H-equation.

    F_i(x) = x_i - 1 / g_i(x),  g_i(x) = 1 - (c / 2N) * sum_j mu_i x_j / (mu_i + mu_j)

    with nodes mu_i = (i + 1/2) / N for 0-based i. The Jacobian is dense:

        dF_i/dx_k = delta_ik - (c / 2N) * mu_i / ((mu_i + mu_k) * g_i(x)^2)
    """

    name = "chandrasekhar"

    def __init__(self, N, c=0.9):
        super().__init__(N, N)
        if not 0.0 <= c <= 1.0:
            raise ParameterError(f"c must lie in [0, 1], got {c}")
        self.N = self.m
        self.c = float(c)
        self.mu = (np.arange(self.N) + 0.5) / self.N
        self._scale = self.c / (2 * self.N)
        if self.N * self.N <= _DENSE_KERNEL_LIMIT:
            self._kernel = self._kernel_rows(np.arange(self.N))
            self._kernel.setflags(write=False)
        else:
            self._kernel = None

    def _kernel_rows(self, idx):
        mu_i = self.mu[idx, None]
        return self._scale * mu_i / (mu_i + self.mu[None, :])

    def _rows(self, idx):
        if self._kernel is not None:
            return self._kernel[idx]
        return self._kernel_rows(idx)

    def denominators(self, x, idx=None):
        """g_i(x) for i in ``idx`` (all rows when None)."""
        x = np.asarray(x, dtype=float)
        # einsum reduces each row independently of the others, so a block of
        # rows reproduces the full evaluation bit for bit (BLAS gemv does not)
        if idx is None:
            if self._kernel is not None:
                g = 1.0 - np.einsum("ij,j->i", self._kernel, x)
            else:
                g = np.empty(self.N)
                for s in range(0, self.N, _ROW_CHUNK):
                    rows = np.arange(s, min(s + _ROW_CHUNK, self.N))
                    g[rows] = 1.0 - np.einsum("ij,j->i", self._kernel_rows(rows), x)
        else:
            g = 1.0 - np.einsum("ij,j->i", self._rows(idx), x)
        zero = g == 0.0
        if zero.any():
            i = int(np.flatnonzero(zero)[0])
            if idx is not None:
                i = int(idx[i])
            raise DomainError(f"denominator g_{i}(x) vanishes", index=i)
        return g

    def _residual(self, x):
        return x - 1.0 / self.denominators(x)

    def _residual_block(self, x, idx):
        return x[idx] - 1.0 / self.denominators(x, idx)

    def _jacobian_block(self, x, idx):
        g = self.denominators(x, idx)
        J = -self._rows(idx) / (g * g)[:, None]
        J[np.arange(idx.size), idx] += 1.0
        return J

    def __repr__(self):
        return f"Chandrasekhar(N={self.N}, c={self.c})"


class BroydenTridiagonal(NonlinearSystem):
    """Broyden tridiagonal function.

    F_k(x) = x_k (0.5 x_k - 3) + x_{k-1} + 2 x_{k+1} - 1, with the missing
    neighbours dropped in the first and last rows. Jacobian rows carry 1 on
    the subdiagonal, x_k - 3 on the diagonal and 2 on the superdiagonal.
    """

    name = "broyden"

    def __init__(self, m):
        super().__init__(m, m)

    def _residual(self, x):
        f = x * (0.5 * x - 3.0) - 1.0
        f[1:] += x[:-1]
        f[:-1] += 2.0 * x[1:]
        return f

    def _residual_block(self, x, idx):
        f = x[idx] * (0.5 * x[idx] - 3.0) - 1.0
        lo = idx > 0
        hi = idx < self.m - 1
        f[lo] += x[idx[lo] - 1]
        f[hi] += 2.0 * x[idx[hi] + 1]
        return f

    def _jacobian_block(self, x, idx):
        J = np.zeros((idx.size, self.n))
        rows = np.arange(idx.size)
        J[rows, idx] = x[idx] - 3.0
        lo = idx > 0
        hi = idx < self.m - 1
        J[rows[lo], idx[lo] - 1] = 1.0
        J[rows[hi], idx[hi] + 1] = 2.0
        return J


class LinearSystem(NonlinearSystem):
    """Affine map F(x) = A x - b."""

    name = "linear"

    def __init__(self, A, b):
        A = np.array(A, dtype=float, ndmin=2)
        b = np.array(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != b.size:
            raise ParameterError(f"A of shape {A.shape} is incompatible with b of length {b.size}")
        super().__init__(*A.shape)
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b

    def _residual(self, x):
        return np.einsum("ij,j->i", self.A, x) - self.b

    def _residual_block(self, x, idx):
        return np.einsum("ij,j->i", self.A[idx], x) - self.b[idx]

    def _jacobian_block(self, x, idx):
        return self.A[idx].copy()


def make_linear(A, b):
    return LinearSystem(A, b)


def random_linear(m, n, cond=10.0, seed=0):
    """Random m x n matrix with prescribed 2-norm condition number and a known solution.

    Returns ``(problem, x_star)`` with b = A @ x_star, so the system is consistent.
    """
    if n > m:
        raise ParameterError(f"need m >= n for full column rank, got m={m}, n={n}")
    if cond < 1:
        raise ParameterError(f"condition number must be >= 1, got {cond}")
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.geomspace(1.0, 1.0 / cond, n) if n > 1 else np.ones(1)
    A = (U * s) @ V.T
    x_star = rng.standard_normal(n)
    return LinearSystem(A, A @ x_star), x_star


def fd_jacobian(problem, x, h=None):
    """Central-difference Jacobian, one column per coordinate.

    With ``h=None`` the step for coordinate k is eps**(1/3) * (1 + |x_k|).
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        steps = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.abs(x))
    else:
        if h <= 0:
            raise ParameterError(f"step must be positive, got {h}")
        steps = np.full(x.size, float(h))
    J = np.empty((problem.m, problem.n))
    for k in range(problem.n):
        xp = x.copy()
        xm = x.copy()
        xp[k] += steps[k]
        xm[k] -= steps[k]
        # the realized step differs from steps[k] by rounding
        J[:, k] = (problem.residual(xp) - problem.residual(xm)) / (xp[k] - xm[k])
    return J


def build_problem(name, size, **params):
    """Construct a built-in problem by name.

    Returns ``(problem, x0, x_ref)``; ``x_ref`` is only known for the linear
    family and is ``None`` otherwise.
    """
    if name == "chandrasekhar":
        return Chandrasekhar(size, c=params.get("c", 0.9)), np.zeros(size), None
    if name == "broyden":
        return BroydenTridiagonal(size), -np.ones(size), None
    if name == "linear":
        n = params.get("n") or max(1, size // 2)
        problem, x_star = random_linear(size, n, cond=params.get("cond", 10.0),
                                        seed=params.get("problem_seed", 0))
        return problem, np.zeros(n), x_star
    raise ParameterError(f"unknown problem {name!r}")


PROBLEMS = ("chandrasekhar", "broyden", "linear")
