"""Principal eigenvalues of the linearized two-species operator.

The linearization at (0,0) couples the two densities through the mutation
rates, giving a cooperative elliptic system.  Three principal-eigenvalue
notions are computed on a conservative-flux finite-difference grid:

  * periodic         -- growth rate of small L-periodic data,
  * exponent-tilted  -- k(lambda), the Perron eigenvalue of the operator
                        conjugated by exp(lambda x), periodic eigenvector,
  * Dirichlet        -- on (-R, R) with zero boundary values.

The tilted operator is assembled by conjugating the flux stencil itself,
exp(lambda x_i) * D[exp(-lambda x) w]_i, which multiplies the off-diagonal
flux entries by exp(-lambda h) and exp(+lambda h).  Off-diagonals therefore
stay positive for every lambda and h, and the matrix is Metzler and
irreducible, so the Perron root and a componentwise positive eigenvector
exist on the discrete level exactly as in the continuous theory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import CoefficientSet
from .errors import NumericalError, PreconditionError, ValidationError
from .util import write_csv

REFINE_CAP = 2 ** 20          # hard cap on cells per period / interval
RESIDUAL_TOL = 1e-9
RAYLEIGH_TOL = 1e-12
K_GRID_TOL = 1e-7             # |k_n - k_2n| refinement target


@dataclass(frozen=True)
class GridSpec:
    """Cell count and boundary kind for the eigenvalue discretization."""

    n_cells: int = 64
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValidationError("n_cells must be at least 16")
        if self.boundary not in ("periodic", "dirichlet"):
            raise ValidationError(f"unknown boundary kind {self.boundary!r}")


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled 2n x 2n coupled operator (u unknowns first, then v)."""

    matrix: sp.csr_matrix
    n: int
    h: float
    lam: float
    boundary: str
    nodes: np.ndarray

    @property
    def dimension(self) -> int:
        return 2 * self.n

    def min_offdiagonal(self) -> float:
        coo = self.matrix.tocoo()
        off = coo.data[coo.row != coo.col]
        return float(off.min()) if off.size else 0.0


@dataclass
class EigenResult:
    """Principal eigenvalue with its positive discrete eigenvector pair."""

    value: float
    phi: np.ndarray
    psi: np.ndarray
    lam: float
    iterations: int
    residual: float
    n_cells: int
    h: float

    def eigenvector(self) -> np.ndarray:
        return np.concatenate([self.phi, self.psi])


def peclet_cells(cs: CoefficientSet, lam: float, n_cells: int, length: float) -> int:
    """Smallest power-of-two refinement of n_cells with h*|lam|*sigma_max <= sigma_min."""
    n = n_cells
    while n <= REFINE_CAP:
        h = length / n
        if h * abs(lam) * cs.sigma_max <= cs.sigma_min:
            return n
        n *= 2
    raise NumericalError(f"grid refinement cap {REFINE_CAP} exceeded while enforcing "
                         f"the advection admissibility bound at lambda={lam}")


def _assemble(cs: CoefficientSet, lam: float, n: int, h: float, nodes: np.ndarray,
              periodic: bool) -> sp.csr_matrix:
    """Conjugated conservative-flux stencil plus reaction/mutation diagonals."""
    sig_right = cs.sigma(nodes + 0.5 * h)        # sigma at i+1/2
    sig_left = cs.sigma(nodes - 0.5 * h)         # sigma at i-1/2
    ep, em = np.exp(lam * h), np.exp(-lam * h)
    sup = sig_right * em / h ** 2                # couples node i to i+1
    sub = sig_left * ep / h ** 2                 # couples node i to i-1
    diag_flux = -(sig_right + sig_left) / h ** 2

    ru, rv = cs.r_u(nodes), cs.r_v(nodes)
    mu, mv = cs.mu_u(nodes), cs.mu_v(nodes)

    rows, cols, data = [], [], []

    def add_block(offset, diag_react):
        i = np.arange(n)
        rows.append(offset + i); cols.append(offset + i)
        data.append(diag_flux + diag_react)
        if periodic:
            rows.append(offset + i); cols.append(offset + (i + 1) % n); data.append(sup)
            rows.append(offset + i); cols.append(offset + (i - 1) % n); data.append(sub)
        else:
            rows.append(offset + i[:-1]); cols.append(offset + i[1:]); data.append(sup[:-1])
            rows.append(offset + i[1:]); cols.append(offset + i[:-1]); data.append(sub[1:])

    add_block(0, ru - mu)
    add_block(n, rv - mv)
    i = np.arange(n)
    rows.append(i); cols.append(n + i); data.append(mv)       # u-row coupling to v
    rows.append(n + i); cols.append(i); data.append(mu)       # v-row coupling to u

    m = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * n, 2 * n))
    return m.tocsr()


def build_operator(cs: CoefficientSet, lam: float, grid: GridSpec,
                   half_width: Optional[float] = None,
                   refine: bool = True) -> DiscreteOperator:
    """Assemble the coupled discrete operator on the requested grid.

    Periodic grids discretize one period with n_cells nodes; Dirichlet grids
    need half_width=R and place n_cells interior nodes on (-R, R), the
    eigenvector being extended by zero at the endpoints.  At lambda=0 the
    periodic operator reduces to the plain linearized one.
    """
    if grid.boundary == "dirichlet":
        if half_width is None or not (half_width > 0):
            raise ValidationError("dirichlet grids need a positive half_width R")
        if lam != 0.0:
            raise ValidationError("the Dirichlet eigenproblem is posed at lambda=0")
        n = grid.n_cells
        h = 2.0 * half_width / (n + 1)
        nodes = -half_width + h * np.arange(1, n + 1)
        matrix = _assemble(cs, 0.0, n, h, nodes, periodic=False)
        return DiscreteOperator(matrix, n, h, 0.0, "dirichlet", nodes)

    n = peclet_cells(cs, lam, grid.n_cells, cs.period) if refine else grid.n_cells
    h = cs.period / n
    nodes = h * np.arange(n)
    matrix = _assemble(cs, lam, n, h, nodes, periodic=True)
    return DiscreteOperator(matrix, n, h, lam, "periodic", nodes)


# -- Perron iteration --------------------------------------------------------

def _start_vector(op: DiscreteOperator, warm) -> np.ndarray:
    if warm is not None:
        phi, psi = warm
        if len(phi) != op.n:
            xs_old = np.linspace(0.0, 1.0, len(phi), endpoint=False)
            xs_new = np.linspace(0.0, 1.0, op.n, endpoint=False)
            phi = np.interp(xs_new, xs_old, phi, period=1.0)
            psi = np.interp(xs_new, xs_old, psi, period=1.0)
        w = np.concatenate([phi, psi])
        if np.all(w > 0):
            return w / np.max(w)
    return np.ones(op.dimension)


def _finalize(op: DiscreteOperator, w: np.ndarray, value: float, residual: float,
              iterations: int) -> EigenResult:
    w = w / np.max(np.abs(w))
    if w[np.argmax(np.abs(w))] < 0:
        w = -w
    if np.min(w) <= 0:
        raise NumericalError("Perron iteration produced a non-positive eigenvector "
                             f"(min component {np.min(w):.3e})")
    return EigenResult(value=float(value), phi=w[:op.n].copy(), psi=w[op.n:].copy(),
                       lam=op.lam, iterations=iterations, residual=float(residual),
                       n_cells=op.n, h=op.h)


def _rayleigh_and_residual(matrix, w) -> Tuple[float, float]:
    mw = matrix @ w
    value = float(w @ mw) / float(w @ w)
    residual = float(np.max(np.abs(mw - value * w))) / float(np.max(np.abs(w)))
    return value, residual


def principal_eigenpair(op: DiscreteOperator, method: str = "resolvent",
                        warm=None, residual_tol: float = RESIDUAL_TOL,
                        max_iterations: Optional[int] = None) -> EigenResult:
    """Perron eigenpair of a cooperative discrete operator.

    method="power" runs the textbook iteration on the entrywise-nonnegative
    shift B = M + sI, s = 1 + max(0, -min diagonal); it is kept as a
    cross-check because its convergence rate degrades like h^2 (the shift
    grows with the diffusion scale 1/h^2 while the spectral gap stays O(1)).

    method="resolvent" (default) iterates instead on (I - dt*M)^{-1} with
    dt*max_row_sum < 1.  That matrix is the inverse of an irreducible
    M-matrix, hence entrywise positive with the same Perron eigenvector, and
    the iteration converges at an h-independent geometric rate.  One sparse
    LU factorization is reused across iterations.

    Convergence requires both a Rayleigh-quotient change below 1e-12 and a
    sup-norm residual of the unshifted operator below residual_tol.  The
    residual of M w - value w cannot drop below machine epsilon times the
    operator norm (the flux entries scale like 1/h^2), so the tolerance is
    floored there on fine grids.
    """
    if op.min_offdiagonal() < 0:
        raise ValidationError("operator is not cooperative: negative off-diagonal entry")
    matrix = op.matrix
    op_norm = float(np.max(np.abs(matrix).sum(axis=1)))
    residual_tol = max(residual_tol, 8.0 * np.finfo(float).eps * op_norm)
    w = _start_vector(op, warm)

    if method == "power":
        max_iterations = max_iterations or 10 ** 6
        diag = matrix.diagonal()
        s = 1.0 + max(0.0, -float(diag.min()))
        shifted = (matrix + s * sp.identity(op.dimension, format="csr")).tocsr()
        value, residual = _rayleigh_and_residual(matrix, w)
        applications = 1
        stagnant = 0
        for it in range(1, max_iterations + 1):
            for _ in range(applications):
                w = shifted @ w
                w /= np.max(np.abs(w))
            new_value, new_residual = _rayleigh_and_residual(matrix, w)
            if new_residual > 0.9999 * residual and residual > 0:
                stagnant += 1
                if stagnant >= 10 ** 4 and applications == 1:
                    applications = 2       # iterate B^2 to square the gap ratio
                    stagnant = 0
            else:
                stagnant = 0
            ray_tol = max(RAYLEIGH_TOL * max(1.0, abs(new_value)), 0.01 * residual_tol)
            converged = abs(new_value - value) < ray_tol and new_residual < residual_tol
            value, residual = new_value, new_residual
            if converged:
                return _finalize(op, w, value, residual, it)
        raise NumericalError(f"power iteration did not converge in {max_iterations} "
                             f"iterations (last residual {residual:.3e})")

    if method != "resolvent":
        raise ValidationError(f"unknown eigen method {method!r}")

    max_iterations = max_iterations or 10 ** 4
    row_sums = np.asarray(matrix.sum(axis=1)).ravel()
    dt = 1.0 / (max(float(row_sums.max()), 0.0) + 1.0)
    solver = spla.splu((sp.identity(op.dimension, format="csc") - dt * matrix).tocsc())
    value, residual = _rayleigh_and_residual(matrix, w)
    applications = 1
    stagnant = 0
    for it in range(1, max_iterations + 1):
        for _ in range(applications):
            w = solver.solve(w)
            w /= np.max(np.abs(w))
        new_value, new_residual = _rayleigh_and_residual(matrix, w)
        if new_residual > 0.95 * residual and residual > 0:
            stagnant += 1
            if stagnant >= 50 and applications < 8:
                applications *= 2
                stagnant = 0
        else:
            stagnant = 0
        ray_tol = max(RAYLEIGH_TOL * max(1.0, abs(new_value)), 0.01 * residual_tol)
        converged = abs(new_value - value) < ray_tol and new_residual < residual_tol
        value, residual = new_value, new_residual
        if converged:
            return _finalize(op, w, value, residual, it)
    raise NumericalError(f"resolvent iteration did not converge in {max_iterations} "
                         f"iterations (last residual {residual:.3e})")


# -- eigenvalue curves with grid refinement ----------------------------------

SOFT_CELL_CAP = 2 ** 18       # past this the rounding floor always dominates


def _refine_to_tolerance(make_op, n: int, tol: float, warm, label: str) -> EigenResult:
    """Double the grid until |k_n - k_2n| < tol, then Richardson-extrapolate.

    The inter-level gap of the second-order stencil shrinks 4x per doubling
    until rounding noise (machine epsilon times the 1/h^2 flux scale) takes
    over, after which refining cannot help; the loop therefore also stops
    when a small gap stops shrinking, returning the best achievable value.
    """
    result = principal_eigenpair(make_op(n), warm=warm)
    total_iter = result.iterations
    prev_gap = np.inf
    while True:
        n *= 2
        if n > REFINE_CAP:
            raise NumericalError(f"grid refinement cap {REFINE_CAP} exceeded before "
                                 f"the eigenvalue gap fell below {tol} at {label}")
        finer = principal_eigenpair(make_op(n), warm=(result.phi, result.psi))
        total_iter += finer.iterations
        gap = abs(finer.value - result.value)
        scale = max(1.0, abs(finer.value))
        at_noise_floor = gap > 0.6 * prev_gap and prev_gap < 1e-2 * scale
        past_soft_cap = n >= SOFT_CELL_CAP
        if past_soft_cap and gap > 1e-4 * scale:
            raise NumericalError(f"eigenvalue gap {gap:.2e} still large at the "
                                 f"{SOFT_CELL_CAP}-cell level for {label}")
        if gap < tol or at_noise_floor or past_soft_cap:
            finer.value = finer.value + (finer.value - result.value) / 3.0
            finer.iterations = total_iter
            return finer
        result = finer
        prev_gap = gap


def k_of_lambda(cs: CoefficientSet, lam: float, grid: Optional[GridSpec] = None,
                tol: float = K_GRID_TOL, warm=None) -> EigenResult:
    """Exponent-tilted principal eigenvalue k(lambda) with automatic refinement.

    The grid is doubled until successive eigenvalues differ by less than tol;
    the returned value is the Richardson extrapolation of the last two levels
    (the flux stencil is second order, so this cancels the leading h^2 term).
    k(0) is the periodic principal eigenvalue.
    """
    grid = grid or GridSpec()
    n = peclet_cells(cs, lam, grid.n_cells, cs.period)
    return _refine_to_tolerance(lambda m: _periodic_op(cs, lam, m), n, tol, warm,
                                f"lambda={lam}")


def _periodic_op(cs: CoefficientSet, lam: float, n: int) -> DiscreteOperator:
    h = cs.period / n
    nodes = h * np.arange(n)
    return DiscreteOperator(_assemble(cs, lam, n, h, nodes, periodic=True),
                            n, h, lam, "periodic", nodes)


def periodic_eigenvalue(cs: CoefficientSet, grid: Optional[GridSpec] = None,
                        tol: float = K_GRID_TOL) -> EigenResult:
    """Periodic principal eigenvalue, i.e. k(0)."""
    return k_of_lambda(cs, 0.0, grid, tol)


def dirichlet_eigenvalue(cs: CoefficientSet, R: float,
                         grid: Optional[GridSpec] = None,
                         tol: float = K_GRID_TOL, warm=None) -> EigenResult:
    """Principal eigenvalue on (-R, R) with zero boundary values.

    Same refinement-plus-extrapolation contract as k_of_lambda; the initial
    cell count is scaled with the interval so the coefficients stay resolved.
    """
    if not (R > 0):
        raise PreconditionError("Dirichlet half-width R must be positive")
    grid = grid or GridSpec()
    per_period = max(grid.n_cells, 16)
    n = max(per_period, int(np.ceil(per_period * 2.0 * R / cs.period)))
    return _refine_to_tolerance(lambda m: _dirichlet_op(cs, R, m), n, tol, warm,
                                f"R={R}")


def _dirichlet_op(cs: CoefficientSet, R: float, n: int) -> DiscreteOperator:
    h = 2.0 * R / (n + 1)
    nodes = -R + h * np.arange(1, n + 1)
    return DiscreteOperator(_assemble(cs, 0.0, n, h, nodes, periodic=False),
                            n, h, 0.0, "dirichlet", nodes)


def minimax_check(cs: CoefficientSet, lam: float, grid: GridSpec,
                  test_pair: Tuple[np.ndarray, np.ndarray]) -> float:
    """Collatz-Wielandt upper estimate of k(lambda) from a positive test pair.

    Returns sup over grid nodes of max(L1[phi,psi]/phi, L2[phi,psi]/psi) for
    the discrete tilted operator.  The value is always >= the discrete
    k(lambda), with equality exactly at the principal eigenvector.
    """
    phi, psi = np.asarray(test_pair[0], dtype=float), np.asarray(test_pair[1], dtype=float)
    if np.min(phi) <= 0 or np.min(psi) <= 0:
        raise ValidationError("minimax test pair must be strictly positive")
    op = build_operator(cs, lam, grid, refine=False)
    if len(phi) != op.n or len(psi) != op.n:
        raise ValidationError(f"test pair length {len(phi)} does not match grid n_cells={op.n}")
    w = np.concatenate([phi, psi])
    return float(np.max((op.matrix @ w) / w))


def k_curve(cs: CoefficientSet, lambdas: Sequence[float],
            grid: Optional[GridSpec] = None, tol: float = K_GRID_TOL) -> list:
    """k(lambda) over a lambda grid, warm-starting each solve from its neighbor."""
    results = []
    warm = None
    for lam in lambdas:
        res = k_of_lambda(cs, float(lam), grid, tol, warm=warm)
        warm = (res.phi, res.psi)
        results.append(res)
    return results


def write_k_curve_csv(path, lambdas: Sequence[float], results: Sequence[EigenResult],
                      comments: Sequence[str] = ()) -> None:
    rows = [(lam, r.value, r.residual, str(r.n_cells))
            for lam, r in zip(lambdas, results)]
    write_csv(path, ("lambda", "k", "residual", "n_cells"), rows, comments)


def write_dirichlet_csv(path, radii: Sequence[float], results: Sequence[EigenResult],
                        comments: Sequence[str] = ()) -> None:
    rows = [(R, r.value) for R, r in zip(radii, results)]
    write_csv(path, ("R", "lambda1R"), rows, comments)
