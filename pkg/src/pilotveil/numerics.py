"""Scalar line search, Armijo gradient descent, and derivative checks.

The scalar maximizer is a coarse grid scan followed by golden-section
refinement; it only ever compares function values, so it is invariant
under adding a constant to f or scaling f by a positive factor.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np

from .errors import NoDescentProgress, ValidationError

_INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LineSearchSpec:
    """Search interval, coarse sampling step, and refinement tolerance."""

    lo: float
    hi: float
    coarse_step: float
    refine_tol: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError("line search needs lo < hi")
        if not 0 < self.coarse_step < (self.hi - self.lo):
            raise ValidationError("coarse_step must lie in (0, hi-lo)")
        if self.refine_tol <= 0:
            raise ValidationError("refine_tol must be > 0")


def _golden_max(f, a, b, tol):
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > tol and x1 < x2:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = f(x1)
    return 0.5 * (a + b)


def maximize_scalar(f: Callable[[float], float], spec: LineSearchSpec) -> Tuple[float, float]:
    """Global scalar maximization: coarse scan, then golden-section polish.

    The coarse grid includes both endpoints; exact ties resolve to the
    smallest abscissa (first index). The refined point never leaves
    [lo, hi]. The result is within refine_tol of the global maximizer
    whenever the coarse step undersamples every lobe of f.
    """
    n = int(np.ceil((spec.hi - spec.lo) / spec.coarse_step)) + 1
    xs = np.linspace(spec.lo, spec.hi, n)
    vals = np.array([f(x) for x in xs])
    k = int(np.argmax(vals))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n - 1)]
    x_star = _golden_max(f, a, b, spec.refine_tol)
    x_star = min(max(x_star, spec.lo), spec.hi)
    return x_star, f(x_star)


@dataclass(frozen=True)
class DescentSpec:
    """Armijo backtracking gradient-descent parameters."""

    x0: np.ndarray
    step_init: float = 1.0
    backtrack_ratio: float = 0.5
    armijo_c: float = 1e-4
    grad_tol: float = 1e-9
    max_iter: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if not (0 < self.backtrack_ratio < 1 and 0 < self.armijo_c < 1):
            raise ValidationError("backtrack_ratio and armijo_c must lie in (0,1)")
        if self.step_init <= 0 or self.grad_tol <= 0 or self.max_iter < 1:
            raise ValidationError("step_init, grad_tol positive and max_iter >= 1 required")


_MAX_BACKTRACKS = 60


def minimize_descent(f, grad, spec: DescentSpec, trace=None) -> np.ndarray:
    """Armijo backtracking descent; accepted steps never increase f.

    Stops when ||grad|| < grad_tol or max_iter is reached. If
    backtracking underflows while the remaining decrease is above the
    floating-point resolution of f, raises NoDescentProgress; underflow
    at float-flat objectives returns the current iterate instead.
    ``trace``, if given, is a list collecting the accepted (x, f) pairs.
    """
    x = spec.x0.copy()
    fx = float(f(x))
    if trace is not None:
        trace.append((x.copy(), fx))
    for _ in range(spec.max_iter):
        g = np.asarray(grad(x), dtype=float)
        gnorm = float(np.linalg.norm(g))
        if gnorm < spec.grad_tol:
            return x
        step = spec.step_init
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            x_new = x - step * g
            f_new = float(f(x_new))
            # strict decrease guards against no-op steps once the Armijo
            # margin rounds below the float resolution of f
            if f_new <= fx - spec.armijo_c * step * gnorm * gnorm and f_new < fx:
                accepted = True
                break
            step *= spec.backtrack_ratio
        if not accepted:
            # Objective flat at float resolution: converged for all practical
            # purposes; anything else means the model gradient is inconsistent.
            if abs(float(f(x - spec.grad_tol * g)) - fx) <= 8 * np.finfo(float).eps * abs(fx):
                return x
            raise NoDescentProgress(
                f"backtracking underflowed {_MAX_BACKTRACKS} times at ||grad|| = {gnorm:g}"
            )
        x, fx = x_new, f_new
        if trace is not None:
            trace.append((x.copy(), fx))
    return x


def grid_min_seed(f, bbox: Sequence[Tuple[float, float]], points_per_axis: int) -> np.ndarray:
    """Axis-aligned grid scan; returns the minimizing grid point.

    Ties resolve to the first point in row-major order.
    """
    if points_per_axis < 2:
        raise ValidationError("points_per_axis must be >= 2")
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in bbox]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.array([f(p) for p in pts])
    return pts[int(np.argmin(vals))].copy()


def check_grad(f, grad, x: np.ndarray, h: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    Errors are measured against the finite-difference reference, with a
    floor tied to the overall gradient magnitude so components passing
    through zero do not blow up the ratio.
    """
    if h <= 0:
        raise ValidationError("h must be > 0")
    x = np.asarray(x, dtype=float)
    g = np.asarray(grad(x), dtype=float)
    fd = np.empty_like(g)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fd[k] = (float(f(x + e)) - float(f(x - e))) / (2.0 * h)
    floor = 1e-9 * max(1.0, float(np.max(np.abs(fd))))
    scale = np.maximum(np.abs(fd), floor)
    return float(np.max(np.abs(g - fd) / scale))
