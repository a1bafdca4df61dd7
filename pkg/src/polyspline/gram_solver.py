"""Gram matrix assembly and the regularized solve (K + sigma2*E) lambda = Y.

With ``c ~ 1/omega0**2`` every Gram entry is ``c`` plus a comparatively tiny
informative part, so forming ``K`` densely and solving it directly loses most
of the significant digits.  :class:`GramMatrix` therefore stores the two
pieces separately, ``K + sigma2*E = A + c * 1 1^T`` with
``A = shape + sigma2*E``, and :func:`solve_coefficients` solves the
equivalent bordered system

    [ A    1   ] [lambda]   [Y]
    [ 1^T -1/c ] [  mu  ] = [0]

whose Schur complement is exactly ``K + sigma2*E``.  The auxiliary unknown
``mu = c * sum(lambda)`` is the constant level of the fitted function and is
kept by the model so predictions never have to form ``c * sum(lambda)``.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import ConditioningWarning, DimensionError, DomainError, SingularMatrixError
from .kernel import KernelParams, shape_values

#: Condition estimates above this trigger a :class:`ConditioningWarning`.
COND_WARN_THRESHOLD = 1e12

_EPS = np.finfo(float).eps
_ROW_BLOCK = 256
_PARALLEL_MIN_K = 1024
_REFINE_STEPS = 2


def as_points(points, n: int | None = None, name: str = "points") -> np.ndarray:
    """Coerce to a finite ``(k, n)`` float array.

    A 1-D input is read as ``k`` scalar inputs when ``n`` is 1 or unknown.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        if n not in (None, 1) and arr.size == n:
            arr = arr.reshape(1, n)
        else:
            arr = arr.reshape(-1, 1)
    elif arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a list of vectors, got array of shape {arr.shape}")
    if n is not None and arr.shape[1] != n and arr.shape[0] > 0:
        raise DimensionError(f"{name} have dimension {arr.shape[1]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contain non-finite coordinates")
    return arr


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``a`` and rows of ``b``."""
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(d * d, axis=-1))


def _thread_count(threads):
    if threads is None:
        env = os.environ.get("POLYSPLINE_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise DomainError(f"POLYSPLINE_THREADS must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    return max(1, int(threads))


@dataclass(frozen=True)
class GramMatrix:
    """Regularized Gram matrix ``K + sigma2*E`` held as ``shape + offset``.

    Entry ``(i, j)`` equals ``kernel_eval(||x_i - x_j||) + sigma2*[i == j]``;
    :attr:`matrix` materializes it.  Matrices built with
    :meth:`from_dense` have ``offset == 0``.
    """

    shape: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        s = np.array(self.shape, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise DimensionError(f"Gram matrix must be square and non-empty, got shape {s.shape}")
        if not np.all(np.isfinite(s)) or not np.isfinite(self.offset):
            raise DomainError("Gram matrix entries must be finite")
        if not np.array_equal(s, s.T):
            raise DomainError("Gram matrix must be exactly symmetric")
        s.setflags(write=False)
        object.__setattr__(self, "shape", s)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_dense(cls, matrix) -> "GramMatrix":
        return cls(np.asarray(matrix, dtype=float), 0.0)

    @property
    def dim(self) -> int:
        return self.shape.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.shape + self.offset


def _shape_block(rows, points, params):
    return shape_values(pairwise_distances(rows, points), params)


def assemble_gram(points, params: KernelParams, threads: int | None = None) -> GramMatrix:
    """Build ``K + sigma2*E`` for the given training inputs.

    Row blocks may be evaluated on several threads (capped by ``threads`` or
    the ``POLYSPLINE_THREADS`` environment variable); every entry is an
    independent elementwise computation, so the result does not depend on
    the thread count.
    """
    pts = as_points(points)
    k = pts.shape[0]
    if k < 1:
        raise DimensionError("at least one point is required")
    starts = range(0, k, _ROW_BLOCK)
    nthreads = _thread_count(threads) if k >= _PARALLEL_MIN_K else 1
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            blocks = list(pool.map(lambda s: _shape_block(pts[s:s + _ROW_BLOCK], pts, params), starts))
    else:
        blocks = [_shape_block(pts[s:s + _ROW_BLOCK], pts, params) for s in starts]
    shape = np.vstack(blocks)
    # mirror the upper triangle so symmetry is exact by construction
    upper = np.triu(shape, 1)
    shape = upper + upper.T + np.diag(np.diag(shape))
    shape[np.diag_indices(k)] += params.sigma2
    return GramMatrix(shape, params.c_const)


@dataclass(frozen=True)
class SolveReport:
    """Coefficients of the regularized system and conditioning diagnostics.

    ``offset_level`` is ``gram.offset * sum(lambda_)`` obtained directly from
    the solve (0 for matrices without an offset part).
    """

    lambda_: np.ndarray
    offset_level: float
    condition_estimate: float
    ill_conditioned: bool


def _factor(a):
    """Symmetric indefinite (Bunch-Kaufman) factorization, LU as fallback."""
    anorm = float(np.max(np.sum(np.abs(a), axis=0)))
    lu, piv, info = lapack.dsytrf(a, lower=0)
    if info == 0:
        rcond, _ = lapack.dsycon(lu, piv, anorm, lower=0)

        def solve(rhs):
            x, _ = lapack.dsytrs(lu, piv, rhs, lower=0)
            return x

        return solve, float(rcond)
    lu, piv, info = lapack.dgetrf(a)
    if info != 0:
        return None, 0.0
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")

    def solve(rhs):
        x, _ = lapack.dgetrs(lu, piv, rhs)
        return x

    return solve, float(rcond)


def _singular(gram):
    hint = ("use sigma2 > 0" if gram.offset == 0.0
            else "use sigma2 > 0, or ExactBC mode for unfavourable point configurations")
    return SingularMatrixError(
        f"K + sigma2*E ({gram.dim}x{gram.dim}) is numerically singular "
        f"(e.g. coincident inputs with sigma2 = 0); {hint}"
    )


def _residual(a, x, rhs):
    # extended precision where the platform provides it
    ld = np.longdouble
    r = rhs.astype(ld) - a.astype(ld) @ x.astype(ld)
    return r.astype(float)


def condition_estimate(gram: GramMatrix) -> float:
    """1-norm condition estimate of ``K + sigma2*E`` (LAPACK ``dsycon``)."""
    solve, rcond = _factor(gram.matrix)
    if solve is None or rcond <= 0.0:
        return float("inf")
    return max(1.0, 1.0 / rcond)


def solve_coefficients(gram: GramMatrix, y) -> SolveReport:
    """Solve ``(K + sigma2*E) lambda = Y``.

    Raises :class:`SingularMatrixError` when the factorization meets an exact
    zero pivot or the reciprocal condition number of the system actually
    factored falls below machine epsilon.  Two steps of iterative refinement
    are applied.  A :class:`ConditioningWarning` is issued when the
    condition estimate of ``K + sigma2*E`` exceeds :data:`COND_WARN_THRESHOLD`.
    """
    y = np.asarray(y, dtype=float).ravel()
    k = gram.dim
    if y.size != k:
        raise DimensionError(f"right-hand side has length {y.size}, expected {k}")
    if not np.all(np.isfinite(y)):
        raise DomainError("right-hand side must be finite")

    bordered = gram.offset != 0.0
    if bordered:
        a = np.empty((k + 1, k + 1))
        a[:k, :k] = gram.shape
        a[:k, k] = 1.0
        a[k, :k] = 1.0
        a[k, k] = -1.0 / gram.offset
        rhs = np.append(y, 0.0)
    else:
        a = np.array(gram.shape)
        rhs = y

    solve, rcond = _factor(a)
    if solve is None or not rcond >= _EPS:
        raise _singular(gram)
    x = solve(rhs)
    for _ in range(_REFINE_STEPS):
        x = x + solve(_residual(a, x, rhs))
    if not np.all(np.isfinite(x)):
        raise _singular(gram)

    cond = condition_estimate(gram) if bordered else max(1.0, 1.0 / rcond)
    ill = cond > COND_WARN_THRESHOLD
    if ill:
        warnings.warn(
            f"condition estimate of K + sigma2*E is {cond:.3g} (> {COND_WARN_THRESHOLD:.0e}); "
            "consider sigma2 > 0",
            ConditioningWarning,
            stacklevel=2,
        )
    lam = x[:k].copy()
    level = float(x[k]) if bordered else 0.0
    lam.setflags(write=False)
    return SolveReport(lam, level, cond, ill)
