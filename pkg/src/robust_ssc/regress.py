"""Sparse self-regression: LASSO, residual-constrained l1, two-step, Dantzig.

Every solver regresses a vector ``y`` on the columns of ``Y`` with one column
(``exclude``) held at zero, which is how a data point is kept from
representing itself. Solvers work in Gram form (``G = Y^T Y``, ``c = Y^T y``)
so a batch over all columns of one dataset can share ``G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linprog
from threadpoolctl import threadpool_limits

from .errors import (ColumnErrors, DegenerateStepError, InfeasibleError, IterationLimitError,
                     SSCError)


@dataclass
class RegressionParams:
    lam: Optional[float] = None
    tau: float = 0.0
    alpha0: float = 0.25
    exclude: Optional[int] = None
    tol: float = 1e-6
    max_iter: int = 50000


@dataclass
class SparseCoefficients:
    """Solution of one self-regression problem plus solver metadata."""

    values: np.ndarray
    exclude: Optional[int] = None
    lam: Optional[float] = None
    step1_value: Optional[float] = None
    iterations: int = 0
    kkt_residual: float = 0.0
    residual_norm: Optional[float] = None

    @property
    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    @property
    def support(self):
        return np.flatnonzero(self.values)


@dataclass
class DantzigNoiseStats:
    sigma: float
    n: int
    beta_norm: float
    beta_j: float
    variance: float
    components: tuple = ()


class Dictionary:
    """Columns of ``Y`` with a cached Gram matrix and Lipschitz constant.

    Passing the same instance to many solves (as :func:`regress_all` does)
    avoids recomputing ``Y^T Y``. ``gram=False`` skips the Gram matrix and
    multiplies through ``Y`` instead, for datasets with many columns.
    """

    def __init__(self, Y, gram=True):
        self.Y = np.ascontiguousarray(Y, dtype=float)
        self.n, self.N = self.Y.shape
        self.G = self.Y.T @ self.Y if gram else None
        self._lipschitz = None

    @classmethod
    def wrap(cls, Y):
        return Y if isinstance(Y, Dictionary) else cls(Y)

    @property
    def lipschitz(self) -> float:
        if self._lipschitz is None:
            s = np.linalg.norm(self.Y, 2) if min(self.Y.shape) > 0 else 0.0
            self._lipschitz = max(float(s) ** 2, 1e-300)
        return self._lipschitz

    def corr(self, y):
        return self.Y.T @ y

    def gram_times(self, beta, S):
        if self.G is not None:
            return self.G[:, S] @ beta[S]
        return self.Y.T @ (self.Y[:, S] @ beta[S])

    def gram_block(self, S):
        if self.G is not None:
            return self.G[np.ix_(S, S)]
        YS = self.Y[:, S]
        return YS.T @ YS

    def free_mask(self, exclude):
        free = np.ones(self.N, dtype=bool)
        if exclude is not None:
            free[exclude] = False
        return free


def soft_threshold(x, theta):
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def lasso_objective(y, Y, beta, lam) -> float:
    r = y - np.asarray(Y) @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def kkt_residual(corr, beta, lam, free) -> float:
    """Largest violation of the LASSO optimality conditions.

    ``corr`` is Y^T (y - Y beta). On the support it must equal
    lam * sign(beta_j); elsewhere its magnitude must not exceed lam.
    """
    on = (beta != 0) & free
    off = (beta == 0) & free
    v_on = np.abs(corr[on] - lam * np.sign(beta[on]))
    v_off = np.maximum(np.abs(corr[off]) - lam, 0.0)
    return float(max(v_on.max(initial=0.0), v_off.max(initial=0.0)))


def _cholesky(A, max_cond=1e12):
    """Cholesky factor of A, or None when A is singular or badly conditioned."""
    try:
        cf = scipy.linalg.cho_factor(A, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return None
    d = np.abs(np.diag(cf[0]))
    if d.min() <= 0 or (d.max() / d.min()) ** 2 > max_cond:
        return None
    return cf


def _polish(D, c, lam, beta, free, tol):
    """Solve the LASSO exactly on the support and sign pattern of ``beta``.

    Returns the exact solution if it is sign-consistent and satisfies the
    optimality conditions off the support, else ``None``.
    """
    S = np.flatnonzero(beta)
    if S.size == 0 or S.size > D.n:
        return None
    s = np.sign(beta[S])
    cf = _cholesky(D.gram_block(S))
    if cf is None:
        return None
    b = scipy.linalg.cho_solve(cf, c[S] - lam * s, check_finite=False)
    if not np.all(np.sign(b) == s):
        return None
    out = np.zeros_like(beta)
    out[S] = b
    corr = c - D.gram_times(out, S)
    if kkt_residual(corr, out, lam, free) > tol:
        return None
    return out


def solve_lasso(y, Y, lam, exclude=None, tol=1e-6, max_iter=50000, beta0=None,
                rel_obj_tol=1e-10) -> SparseCoefficients:
    """Minimize 0.5*||y - Y beta||^2 + lam*||beta||_1 with beta[exclude] = 0.

    Accelerated proximal gradient with backtracking and adaptive restart.
    Whenever the support settles, the problem restricted to that support and
    sign pattern is solved exactly; the result is accepted if it passes the
    optimality check, which makes returned solutions accurate to rounding.
    Raises :class:`IterationLimitError` after ``max_iter`` iterations.
    """
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    D = Dictionary.wrap(Y)
    y = np.asarray(y, dtype=float)
    c = D.corr(y)
    free = D.free_mask(exclude)
    N = D.N

    if np.abs(c[free]).max(initial=0.0) <= lam:
        return SparseCoefficients(np.zeros(N), exclude, lam=lam, iterations=0,
                                  kkt_residual=0.0, residual_norm=float(np.linalg.norm(y)))

    x = np.zeros(N) if beta0 is None else np.where(free, beta0, 0.0)
    Sx = np.flatnonzero(x)
    Gx = D.gram_times(x, Sx) if Sx.size else np.zeros(N)
    z, Gz = x.copy(), Gx.copy()
    t = 1.0
    L = D.lipschitz

    def quad(v, Gv):
        return 0.5 * float(v @ Gv) - float(c @ v)

    f_x = quad(x, Gx)
    obj = f_x + lam * np.abs(x).sum()
    last_polish = None
    for k in range(1, max_iter + 1):
        grad = Gz - c
        f_z = quad(z, Gz)
        while True:
            x_new = soft_threshold(z - grad / L, lam / L)
            x_new[~free] = 0.0
            S = np.flatnonzero(x_new)
            Gx_new = D.gram_times(x_new, S) if S.size else np.zeros(N)
            d = x_new - z
            f_new = quad(x_new, Gx_new)
            if f_new <= f_z + grad @ d + 0.5 * L * (d @ d) + 1e-12 * (1 + abs(f_z)):
                break
            L *= 2.0

        obj_new = f_new + lam * np.abs(x_new).sum()
        corr = c - Gx_new
        kkt = kkt_residual(corr, x_new, lam, free)
        rel = abs(obj - obj_new) / max(1.0, abs(obj_new))
        if kkt < tol and rel < rel_obj_tol:
            return _finish(x_new, exclude, lam, k, kkt, y, D)

        key = (tuple(S), tuple(np.sign(x_new[S])))
        if S.size and key != last_polish and (k % 5 == 0 or kkt < 1e3 * tol):
            last_polish = key
            exact = _polish(D, c, lam, x_new, free, tol)
            if exact is not None:
                Sx = np.flatnonzero(exact)
                kkt = kkt_residual(c - D.gram_times(exact, Sx), exact, lam, free)
                return _finish(exact, exclude, lam, k, kkt, y, D)

        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if (z - x_new) @ (x_new - x) > 0:
            # momentum points uphill: restart
            t_new = 1.0
            z, Gz = x_new.copy(), Gx_new.copy()
        else:
            m = (t - 1.0) / t_new
            z = x_new + m * (x_new - x)
            Gz = Gx_new + m * (Gx_new - Gx)
        x, Gx, t, obj = x_new, Gx_new, t_new, obj_new

    raise IterationLimitError(
        f"LASSO did not converge in {max_iter} iterations (KKT residual {kkt:.3e})",
        beta=x, kkt_residual=kkt)


def _finish(beta, exclude, lam, iterations, kkt, y, D):
    S = np.flatnonzero(beta)
    r = y - D.Y[:, S] @ beta[S]
    return SparseCoefficients(beta, exclude, lam=lam, iterations=iterations,
                              kkt_residual=kkt, residual_norm=float(np.linalg.norm(r)))


def _lasso_residual_curve(c, yy, D, beta, lam):
    """Predict the lam at which the residual norm along the current support hits tau.

    On a fixed support S with signs s the LASSO path is beta_S = a - lam*b with
    a = G_SS^-1 c_S and b = G_SS^-1 s, and the squared residual is
    ||y||^2 - c_S.a + lam^2 * s.b. Returns (offset, slope) of that curve in lam^2.
    """
    S = np.flatnonzero(beta)
    if S.size == 0 or S.size > D.n:
        return None
    s = np.sign(beta[S])
    cf = _cholesky(D.gram_block(S))
    if cf is None:
        return None
    a = scipy.linalg.cho_solve(cf, c[S], check_finite=False)
    b = scipy.linalg.cho_solve(cf, s, check_finite=False)
    slope = float(s @ b)
    if not slope > 0:
        return None
    return yy - float(c[S] @ a), slope


def solve_l1_residual_constrained(y, Y, tau, exclude=None, tol_tau=None, tol=1e-6,
                                  max_iter=50000, max_root_iter=200) -> SparseCoefficients:
    """Minimize ||beta||_1 subject to ||y - Y beta||_2 <= tau and beta[exclude] = 0.

    Solved through the LASSO: the residual norm of the LASSO solution is
    nondecreasing in lam, so a root of ||r(lam)|| = tau is bracketed by
    walking down from lam_max and then refined with a support-based secant
    prediction, falling back to geometric bisection. ``step1_value`` on the
    result holds the optimal l1 norm.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    D = Dictionary.wrap(Y)
    y = np.asarray(y, dtype=float)
    N = D.N
    ynorm = float(np.linalg.norm(y))
    if ynorm <= tau:
        return SparseCoefficients(np.zeros(N), exclude, lam=None, step1_value=0.0,
                                  residual_norm=ynorm)
    if tol_tau is None:
        tol_tau = max(1e-6, 1e-3 * tau)

    c = D.corr(y)
    free = D.free_mask(exclude)
    yy = ynorm**2
    lam_max = float(np.abs(c[free]).max(initial=0.0))
    if lam_max == 0.0:
        raise InfeasibleError("y is orthogonal to every allowed column", min_residual=ynorm)
    lam_floor = 1e-8 * lam_max

    def solve(lam, warm):
        return solve_lasso(y, D, lam, exclude=exclude, tol=tol, max_iter=max_iter, beta0=warm)

    def done(sol, lam, its):
        return SparseCoefficients(sol.values, exclude, lam=lam, step1_value=sol.l1,
                                  iterations=its, kkt_residual=sol.kkt_residual,
                                  residual_norm=sol.residual_norm)

    # hi: residual above tau (beta = 0 at lam_max), lo: residual at or below tau
    hi, lo, lo_sol = lam_max, None, None
    sol, lam, its = None, lam_max, 0
    warm = None
    while lo is None:
        guess = None
        if sol is not None:
            curve = _lasso_residual_curve(c, yy, D, sol.values, lam)
            if curve is not None and tau**2 > curve[0]:
                guess = math.sqrt((tau**2 - curve[0]) / curve[1])
        lam = guess if guess is not None and lam_floor < guess < hi else 0.5 * hi
        lam = max(lam, lam_floor)
        sol = solve(lam, warm)
        its += 1
        warm = sol.values
        r = sol.residual_norm
        if abs(r - tau) <= tol_tau:
            return done(sol, lam, its)
        if r < tau:
            lo, lo_sol = lam, sol
        elif lam <= lam_floor:
            raise InfeasibleError(
                f"residual cannot reach tau={tau:.3e}; smallest found {r:.3e}",
                min_residual=r)
        else:
            hi = lam

    for _ in range(max_root_iter):
        guess = None
        curve = _lasso_residual_curve(c, yy, D, sol.values, lam)
        if curve is not None and tau**2 > curve[0]:
            guess = math.sqrt((tau**2 - curve[0]) / curve[1])
        if guess is None or not lo < guess < hi:
            guess = math.sqrt(lo * hi)
        lam = guess
        sol = solve(lam, (lo_sol.values if lo_sol is not None else warm))
        its += 1
        r = sol.residual_norm
        if abs(r - tau) <= tol_tau:
            return done(sol, lam, its)
        if r < tau:
            lo, lo_sol = lam, sol
        else:
            hi = lam
        if hi - lo <= 1e-15 * hi:
            break
    raise IterationLimitError(
        f"residual-constrained root search did not reach tolerance (last residual {r:.3e},"
        f" tau {tau:.3e})", beta=sol.values, kkt_residual=abs(r - tau))


def solve_l1_equality(y, X, exclude=None, tol=1e-6, max_iter=50000) -> SparseCoefficients:
    """Minimize ||beta||_1 subject to y = X beta, beta[exclude] = 0.

    Computed as the residual-constrained problem with tau = 1e-8 * ||y||.
    """
    y = np.asarray(y, dtype=float)
    tau = 1e-8 * float(np.linalg.norm(y))
    return solve_l1_residual_constrained(y, X, tau, exclude=exclude, tol_tau=max(tol, tau),
                                         tol=min(tol, 1e-9), max_iter=max_iter)


def default_alpha0(sigma) -> float:
    return max(0.25, 0.708 * sigma)


def two_step(y, Y, sigma, alpha0=None, exclude=None, tol=1e-6,
             max_iter=50000) -> SparseCoefficients:
    """Data-driven LASSO: calibrate lam from a residual-constrained l1 fit.

    Step one solves the residual-constrained problem with tau = 2*sigma; its
    optimal value t sets lam = alpha0 / t for the LASSO of step two.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if alpha0 is None:
        alpha0 = default_alpha0(sigma)
    D = Dictionary.wrap(Y)
    step1 = solve_l1_residual_constrained(y, D, 2.0 * sigma, exclude=exclude, tol=tol,
                                          max_iter=max_iter)
    t = step1.step1_value
    if t == 0:
        raise DegenerateStepError(
            "step-1 solution is zero (||y|| <= 2 sigma); lam = alpha0/0 is undefined")
    lam = alpha0 / t
    sol = solve_lasso(y, D, lam, exclude=exclude, tol=tol, max_iter=max_iter)
    sol.step1_value = t
    sol.iterations += step1.iterations
    return sol


def dantzig_lambda_heuristic(n, sigma) -> float:
    return math.sqrt(2.0 / n) * sigma * math.sqrt(1.0 + sigma * sigma)


def corrected_dantzig(y, Y, sigma, lam, exclude=None) -> SparseCoefficients:
    """Bias-corrected Dantzig selector.

    Minimizes ||beta||_1 subject to
    ||Y_{-i}^T (y - Y beta) + sigma^2 beta_{-i}||_inf <= lam, beta_i = 0,
    as a linear program in (beta+, beta-).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    D = Dictionary.wrap(Y)
    y = np.asarray(y, dtype=float)
    N = D.N
    free = np.flatnonzero(D.free_mask(exclude))
    c = D.corr(y)[free]
    if np.abs(c).max(initial=0.0) <= lam:
        return SparseCoefficients(np.zeros(N), exclude, lam=lam)

    G = D.gram_block(free)
    A = G - sigma**2 * np.eye(free.size)
    m = free.size
    # constraint c - A beta in [-lam, lam], beta = u - v
    A_ub = np.block([[A, -A], [-A, A]])
    b_ub = np.concatenate([c + lam, lam - c])
    res = linprog(np.ones(2 * m), A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SSCError(f"Dantzig LP failed: {res.message}")
    beta = np.zeros(N)
    beta[free] = res.x[:m] - res.x[m:]
    viol = float(np.abs(c - A @ beta[free]).max() - lam)
    return SparseCoefficients(beta, exclude, lam=lam, iterations=int(res.nit),
                              kkt_residual=max(viol, 0.0))


def dantzig_constraint(y, Y, sigma, beta, exclude=None):
    """Y_{-i}^T (y - Y beta) + sigma^2 beta_{-i}, with the excluded entry zeroed."""
    Y = np.asarray(Y, dtype=float)
    v = Y.T @ (y - Y @ beta) + sigma**2 * beta
    if exclude is not None:
        v[exclude] = 0.0
    return v


def xi_variance(sigma, n, beta, j) -> DantzigNoiseStats:
    """Variance of the j-th entry of the corrected-Dantzig noise term.

    Returns the total together with the four uncorrelated parts: the clean
    column against the residual noise, the noise cross term, the centered
    squared norm of noise column j, and the cross terms with the other
    noise columns.
    """
    beta = np.asarray(beta, dtype=float)
    b2 = float(beta @ beta)
    bj2 = float(beta[j]) ** 2
    s2, s4 = sigma**2, sigma**4
    parts = (s2 / n * (1 + b2), s4 / n, 2 * s4 / n * bj2, s4 / n * (b2 - bj2))
    return DantzigNoiseStats(sigma=sigma, n=n, beta_norm=math.sqrt(b2), beta_j=float(beta[j]),
                             variance=float(sum(parts)), components=parts)


@dataclass(frozen=True)
class Lasso:
    """Fixed-penalty LASSO; ``lam`` is a scalar or one value per column."""

    lam: object


@dataclass(frozen=True)
class TwoStep:
    sigma: float
    alpha0: Optional[float] = None


@dataclass(frozen=True)
class ResidualConstrained:
    """Step one of the two-step procedure on its own (``step1`` holds the l1 value)."""

    tau: float


@dataclass(frozen=True)
class Dantzig:
    """Corrected Dantzig selector; ``lam`` is a scalar or one value per column."""

    sigma: float
    lam: object


@dataclass
class CoefficientMatrix:
    """Column i of ``B`` is the self-regression of point i (diagonal is zero)."""

    B: np.ndarray
    lam: np.ndarray
    step1: np.ndarray
    iterations: np.ndarray
    columns: np.ndarray
    failures: dict = field(default_factory=dict)

    def sparse(self):
        import scipy.sparse
        return scipy.sparse.csc_matrix(self.B)


def _column_value(v, i):
    return float(v) if np.ndim(v) == 0 else float(v[i])


def solve_column(D, i, method, tol=1e-6, max_iter=50000) -> SparseCoefficients:
    """Regress column ``i`` of the dictionary on the others with ``method``."""
    y = D.Y[:, i]
    if isinstance(method, Lasso):
        return solve_lasso(y, D, _column_value(method.lam, i), exclude=i, tol=tol,
                           max_iter=max_iter)
    if isinstance(method, TwoStep):
        return two_step(y, D, method.sigma, method.alpha0, exclude=i, tol=tol,
                        max_iter=max_iter)
    if isinstance(method, ResidualConstrained):
        return solve_l1_residual_constrained(y, D, method.tau, exclude=i, tol=tol,
                                             max_iter=max_iter)
    if isinstance(method, Dantzig):
        return corrected_dantzig(y, D, method.sigma, _column_value(method.lam, i), exclude=i)
    raise TypeError(f"unknown regression method {method!r}")


_WORKER = {}


def _init_worker(D, method, tol, max_iter, pin_blas=False):
    if pin_blas:
        threadpool_limits(1)
    _WORKER.update(D=D, method=method, tol=tol, max_iter=max_iter)


def _run_column(i):
    w = _WORKER
    try:
        return i, solve_column(w["D"], i, w["method"], w["tol"], w["max_iter"]), None
    except SSCError as exc:
        return i, None, exc


def regress_all(Y, method, columns=None, workers=1, tol=1e-6, max_iter=50000,
                raise_on_error=True) -> CoefficientMatrix:
    """Build the coefficient matrix B one column at a time.

    Only ``columns`` (default: all) are solved; the rest of B stays zero.
    Columns are independent, so ``workers > 1`` farms them out to processes;
    BLAS is pinned to one thread per solve so the output does not depend on
    the worker count. Failed columns are left at zero and collected; with
    ``raise_on_error`` a :class:`ColumnErrors` carrying the partial result is
    raised at the end.
    """
    from concurrent.futures import ProcessPoolExecutor

    D = Dictionary.wrap(Y)
    N = D.N
    cols = np.arange(N) if columns is None else np.asarray(columns, dtype=int)
    out = CoefficientMatrix(B=np.zeros((N, N)), lam=np.full(N, np.nan),
                            step1=np.full(N, np.nan), iterations=np.zeros(N, dtype=int),
                            columns=cols)
    if workers <= 1:
        _init_worker(D, method, tol, max_iter)
        with threadpool_limits(1):
            _collect(out, map(_run_column, cols))
    else:
        chunk = max(1, len(cols) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(D, method, tol, max_iter, True)) as pool:
            _collect(out, pool.map(_run_column, cols, chunksize=chunk))
    if out.failures and raise_on_error:
        raise ColumnErrors(out.failures, partial=out)
    return out


def _collect(out, results):
    for i, sol, exc in results:
        if exc is not None:
            out.failures[int(i)] = exc
            continue
        out.B[:, i] = sol.values
        out.B[i, i] = 0.0
        out.lam[i] = np.nan if sol.lam is None else sol.lam
        out.step1[i] = np.nan if sol.step1_value is None else sol.step1_value
        out.iterations[i] = sol.iterations
