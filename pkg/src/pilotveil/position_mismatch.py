"""Stage 2: pseudo-true position and position-domain MCRB/Bias/LB.

The delay estimates feed a range-residual weighted least squares; its
minimizer is the pseudo-true position. The generalized information
matrices follow the real-Gaussian forms (no complex-observation factor
of two), with the curvature of the delay map taken as the diagonal
1/(c d_i) form. The mismatch vector entering A and B is the difference
between the physical delays and the model delays at the evaluation
point, which reproduces the bound's saturation with transmit power and
degenerates to the classical CRB when there is no injection.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import CoincidentPoint, SingularA, SingularGeometry, ValidationError
from .numerics import DescentSpec, grid_min_seed, minimize_descent
from .signal_model import SPEED_OF_LIGHT

MODE_PAPER_LITERAL = "paper"
MODE_TRUE_COVARIANCE = "true"

# Relative objective gap below which two basin minima count as tied.
_BASIN_TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DelayCovariances:
    """Diagonal delay covariances for the two stage-2 models (s^2 entries).

    ``mcrb`` holds the mismatched-delay MCRBs (the true estimate spread),
    ``crb`` the clean-model CRBs assumed by the unaware solver.
    """

    mcrb: np.ndarray
    crb: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mcrb", np.asarray(self.mcrb, dtype=float))
        object.__setattr__(self, "crb", np.asarray(self.crb, dtype=float))
        if self.mcrb.shape != self.crb.shape:
            raise ValidationError("covariance diagonals must have equal length")
        if np.any(self.mcrb <= 0) or np.any(self.crb <= 0):
            raise ValidationError("delay variances must be strictly positive")


@dataclass(frozen=True, eq=False)
class GeneralizedFimMatrix:
    """Position-domain generalizations of the Fisher information."""

    a: np.ndarray
    b: np.ndarray
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


@dataclass(frozen=True, eq=False)
class PositionBoundReport:
    """Position-domain bound bundle; matrices in m^2, scalars in m."""

    pseudo_true_position: np.ndarray
    mcrb_matrix: np.ndarray
    bias_matrix: np.ndarray
    lb_matrix: np.ndarray
    rmse_lb: float
    bias_norm: float
    mcrb_rmse: float
    crb_legit_rmse: float = float("nan")
    runner_up_position: Optional[np.ndarray] = None


def true_delays(p: np.ndarray, positions: np.ndarray, c: float = SPEED_OF_LIGHT) -> np.ndarray:
    """tau_i = ||p - p_i|| / c."""
    p = np.asarray(p, dtype=float)
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    d = np.linalg.norm(p - positions, axis=1)
    if np.any(d == 0.0):
        raise CoincidentPoint("position coincides with an anchor")
    return d / c


def delay_jacobian(p, positions, c: float = SPEED_OF_LIGHT) -> np.ndarray:
    """Row i = (p - p_i)^T / (c ||p - p_i||); each row has norm 1/c."""
    p = np.asarray(p, dtype=float)
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    diff = p - positions
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0.0):
        raise CoincidentPoint("position coincides with an anchor")
    return diff / (c * d[:, None])


def delay_hessian_diag(p, positions, c: float = SPEED_OF_LIGHT) -> np.ndarray:
    """psi_i = 1/(c ||p - p_i||): the k = n curvature entries (zero for k != n)."""
    p = np.asarray(p, dtype=float)
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    d = np.linalg.norm(p - positions, axis=1)
    if np.any(d == 0.0):
        raise CoincidentPoint("position coincides with an anchor")
    return 1.0 / (c * d)


def _nls_objective(positions, ranges, weights):
    """Weighted range-residual NLS in meter units, with O(1) weights."""
    wt = weights.min() / weights  # dimensionless, max entry 1

    def f(p):
        r = np.linalg.norm(p - positions, axis=1) - ranges
        return float(np.sum(wt * r * r))

    def grad(p):
        diff = p - positions
        d = np.linalg.norm(diff, axis=1)
        r = d - ranges
        return np.sum((2.0 * wt * r / d)[:, None] * diff, axis=0)

    return f, grad


def pseudo_true_position(
    positions: np.ndarray,
    tau_bar: np.ndarray,
    weights: np.ndarray,
    seed_box: Sequence[Tuple[float, float]],
    c: float = SPEED_OF_LIGHT,
    points_per_axis: int = 50,
    prefer: Optional[np.ndarray] = None,
    grad_tol: float = 1e-11,
    max_iter: int = 20000,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Minimize the weighted range-residual objective.

    Runs a coarse grid scan over ``seed_box`` and Armijo descent from the
    best grid point (the primary basin), plus descent from the best
    well-separated runner-up grid point for diagnostics. With two anchors
    in the plane both basins reach zero residual; when their minima tie
    and ``prefer`` is given, the minimum nearest ``prefer`` wins,
    otherwise the primary basin does.

    Returns (minimizer, runner_up_minimizer_or_None).
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    tau_bar = np.asarray(tau_bar, dtype=float)
    weights = np.asarray(weights, dtype=float)
    ranges = c * tau_bar
    f, grad = _nls_objective(positions, ranges, weights)

    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in seed_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    res = np.linalg.norm(pts[:, None, :] - positions[None], axis=2) - ranges
    wt = weights.min() / weights
    vals = np.sum(wt * res * res, axis=1)
    order = np.argsort(vals, kind="stable")
    seed_main = pts[order[0]]

    # runner-up seed: best grid point at least two cells away from the winner
    cell = max((hi - lo) / (points_per_axis - 1) for lo, hi in seed_box)
    seed_other = None
    for idx in order[1:]:
        if np.linalg.norm(pts[idx] - seed_main) > 2.0 * cell:
            seed_other = pts[idx]
            break

    def descend(x0):
        return minimize_descent(f, grad, DescentSpec(x0=x0, grad_tol=grad_tol, max_iter=max_iter))

    p_main = descend(seed_main)
    p_other = descend(seed_other) if seed_other is not None else None
    if p_other is not None and np.linalg.norm(p_other - p_main) <= 10.0 * grad_tol + 1e-9:
        p_other = None  # same basin

    best, other = p_main, p_other
    if p_other is not None:
        f_main, f_other = f(p_main), f(p_other)
        tied = abs(f_main - f_other) <= _BASIN_TIE_RTOL * (1.0 + max(abs(f_main), abs(f_other)))
        if f_other < f_main and not tied:
            best, other = p_other, p_main
        elif tied and prefer is not None:
            prefer = np.asarray(prefer, dtype=float)
            if np.linalg.norm(p_other - prefer) < np.linalg.norm(p_main - prefer):
                best, other = p_other, p_main
    return best, other


def generalized_fims(
    p_eval: np.ndarray,
    positions: np.ndarray,
    tau_physical: np.ndarray,
    cov: DelayCovariances,
    mode: str = MODE_PAPER_LITERAL,
    c: float = SPEED_OF_LIGHT,
) -> GeneralizedFimMatrix:
    """A and B at the evaluation point (normally the pseudo-true position).

    ``tau_physical`` holds the geometric delays of the true position; the
    mismatch vector is eps = tau_physical - tau_model(p_eval). A gets the
    diagonal curvature correction psi^T Xi_M^-1 eps; B is the score outer
    product, whose second term uses Xi_M^-1 in the literal mode and
    Xi_M^-1 Xi_T Xi_M^-1 when the true delay covariance is requested.
    """
    if mode not in (MODE_PAPER_LITERAL, MODE_TRUE_COVARIANCE):
        raise ValidationError(f"unknown B-matrix mode {mode!r}")
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    eps = np.asarray(tau_physical, dtype=float) - true_delays(p_eval, positions, c)
    J = delay_jacobian(p_eval, positions, c)
    psi = delay_hessian_diag(p_eval, positions, c)
    w_m = 1.0 / cov.crb
    D = positions.shape[1]
    G = J.T @ (w_m[:, None] * J)
    a = float(np.dot(psi * w_m, eps)) * np.eye(D) - G
    score = J.T @ (w_m * eps)
    if mode == MODE_PAPER_LITERAL:
        second = G
    else:
        second = J.T @ ((w_m * cov.mcrb * w_m)[:, None] * J)
    b = np.outer(score, score) + second
    return GeneralizedFimMatrix(a=a, b=b, mode=mode)


def mcrb_position(gf: GeneralizedFimMatrix) -> np.ndarray:
    """The sandwich A^-1 B A^-1, symmetrized against round-off."""
    try:
        a_inv = np.linalg.inv(gf.a)
    except np.linalg.LinAlgError as exc:
        raise SingularA("A generalized FIM is singular") from exc
    if not np.all(np.isfinite(a_inv)):
        raise SingularA("A generalized FIM inversion overflowed")
    m = a_inv @ gf.b @ a_inv
    return 0.5 * (m + m.T)


def lb_position(
    p_true: np.ndarray,
    p_pseudo: np.ndarray,
    mcrb_matrix: np.ndarray,
    crb_legit_rmse: float = float("nan"),
    runner_up_position: Optional[np.ndarray] = None,
) -> PositionBoundReport:
    """LB = MCRB + bias outer product; scalar bounds via matrix traces."""
    p_true = np.asarray(p_true, dtype=float)
    p_pseudo = np.asarray(p_pseudo, dtype=float)
    mcrb_matrix = np.asarray(mcrb_matrix, dtype=float)
    if not (np.all(np.isfinite(p_true)) and np.all(np.isfinite(mcrb_matrix))):
        raise ValidationError("lb_position needs finite inputs")
    diff = p_true - p_pseudo
    bias_matrix = np.outer(diff, diff)
    lb_matrix = mcrb_matrix + bias_matrix
    return PositionBoundReport(
        pseudo_true_position=p_pseudo,
        mcrb_matrix=mcrb_matrix,
        bias_matrix=bias_matrix,
        lb_matrix=lb_matrix,
        rmse_lb=float(np.sqrt(np.trace(lb_matrix))),
        bias_norm=float(np.linalg.norm(diff)),
        mcrb_rmse=float(np.sqrt(np.trace(mcrb_matrix))),
        crb_legit_rmse=crb_legit_rmse,
        runner_up_position=runner_up_position,
    )


def crb_position(
    p: np.ndarray,
    positions: np.ndarray,
    xi_diag: np.ndarray,
    c: float = SPEED_OF_LIGHT,
) -> np.ndarray:
    """Classical position CRB (J^T Xi^-1 J)^-1 for delay-variance diagonal Xi."""
    J = delay_jacobian(p, positions, c)
    xi_diag = np.asarray(xi_diag, dtype=float)
    if np.any(xi_diag <= 0):
        raise ValidationError("delay variances must be positive")
    fim = J.T @ ((1.0 / xi_diag)[:, None] * J)
    cond = np.linalg.cond(fim)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularGeometry("anchor geometry is rank deficient for this position")
    return np.linalg.inv(fim)
