"""Boundary blow-up solutions of ``(-Delta)^s u = -u^p``.

The large solution is the increasing limit of ``u_j`` with ``u_j / h1 = j``
on the boundary.  Each ``u_j`` is bounded by the explicit supersolution

    ubar = mu G^s[1] + lam d^-a,    a = 2s/(p-1),

where ``d`` is a smooth distance function, so ``u ~ delta^-a`` near the
boundary.  Only the interval is supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dirichlet import GreenOperator, constant_boundary, solve_linear
from .domain import SpectralDomain, build_domain
from .errors import (InvalidConfigurationError, NonConvergenceError,
                     SupersolutionError)
from .kernels import KernelEvaluator, check_order
from .numerics import GridFunction, RateFit, boundary_graded_grid, fit_boundary_rate
from .semilinear import power, solve_semilinear
from .spectral import apply_pointwise

DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64)


@dataclass(frozen=True)
class LargeRunConfig:
    """Parameters of a large-solution run.

    Parameters
    ----------
    s, p : float
        ``p`` must lie strictly inside ``(1 + s, 1 / (1 - s))``.
    schedule : tuple of int
        Increasing boundary levels ``j``.
    stagnation_tol : float
        Relative sup-norm change of successive ``u_j`` on the core below
        which the interior counts as converged.
    window : (float, float) or None
        Rate-fit window in ``delta``; ``None`` picks one (see
        :meth:`fit_window`).
    core : float
        The core is ``delta >= core * diam``.
    n, ratio, delta_min : grid parameters
    band_top : float
        Upper end of the near-boundary band, as a fraction of ``diam``.
    """

    s: float
    p: float
    schedule: tuple = DEFAULT_SCHEDULE
    stagnation_tol: float = 0.1
    window: tuple | None = None
    core: float = 0.2
    n: int = 256
    ratio: float = 0.5
    delta_min: float = 1e-10
    band_top: float = 0.1
    domain: SpectralDomain = field(default_factory=build_domain)

    def __post_init__(self):
        s = check_order(self.s, allow_one=False)
        lo, hi = 1.0 + s, 1.0 / (1.0 - s)
        if not (lo < self.p < hi):
            raise InvalidConfigurationError(f"p outside ({lo:g}, {hi:g})")
        sched = tuple(int(j) for j in self.schedule)
        if not sched or any(j < 1 for j in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise InvalidConfigurationError("schedule must be increasing positive integers")
        object.__setattr__(self, "schedule", sched)
        if self.domain.dim != 1:
            raise InvalidConfigurationError("large solutions are implemented on the interval")
        if not self.stagnation_tol > 0:
            raise InvalidConfigurationError("stagnation_tol must be positive")
        if not 0 < self.core < 0.5:
            raise InvalidConfigurationError("core must lie in (0, 0.5)")
        if self.window is not None:
            a, b = (float(w) for w in self.window)
            if not 0 < a < b:
                raise InvalidConfigurationError("window must satisfy 0 < lo < hi")
            object.__setattr__(self, "window", (a, b))

    @property
    def alpha(self) -> float:
        return 2.0 * self.s / (self.p - 1.0)

    def crossover(self, j: float, C: float = 1.0) -> float:
        """``delta`` below which ``u_j`` follows ``j h1`` rather than ``delta^-a``."""
        return (C / j) ** (1.0 / (self.alpha - (2.0 - 2.0 * self.s)))

    def fit_window(self) -> tuple:
        """Explicit window, or ``[lo, diam / 10]`` with ``lo`` the larger of
        ``diam / 1000`` and 1000 crossovers of the last schedule level."""
        if self.window is not None:
            return self.window
        hi = 0.1 * self.domain.diam
        lo = max(1e3 * self.crossover(self.schedule[-1]), hi / 100.0)
        return (min(lo, hi / 10.0), hi)


class LargeProblem:
    """Grid, kernels and ``h1`` shared by every ``u_j`` of a run."""

    def __init__(self, config: LargeRunConfig, evaluator: KernelEvaluator | None = None):
        self.config = config
        dom = config.domain
        self.grid = boundary_graded_grid(dom, n=config.n, ratio=config.ratio,
                                         delta_min=config.delta_min)
        self.evaluator = evaluator if evaluator is not None else KernelEvaluator(dom, config.s)
        self.operator = GreenOperator(self.evaluator, self.grid)
        self.h1 = solve_linear(config.s, None, constant_boundary(dom), self.grid, self.evaluator)
        self.g = power(config.p)


def solve_datum_j(config: LargeRunConfig, j: float, problem: LargeProblem | None = None,
                  tol: float = 1e-10, max_iter: int = 2000) -> GridFunction:
    """``(-Delta)^s u_j = -u_j^p`` with ``u_j / h1 = j`` on the boundary."""
    if problem is None:
        problem = LargeProblem(config)
    grid = problem.grid
    if j == 0:
        return GridFunction(grid, np.zeros(grid.size), lambda x: np.zeros(len(np.atleast_2d(x))),
                            {"j": 0})
    if j < 0:
        raise InvalidConfigurationError("boundary level must be nonnegative")
    base = problem.h1
    part = GridFunction(grid, j * base.values, lambda x: j * base.exact(x))
    scale = j * float(np.dot(base.values, grid.weights * grid.delta))
    u = solve_semilinear(config.s, problem.g, constant_boundary(config.domain, j), grid,
                         tol=tol * scale, max_iter=max_iter, start="sub", scheme="newton",
                         operator=problem.operator, boundary_part=part)
    u.info["j"] = j
    return u


@dataclass(frozen=True)
class Supersolution:
    """``mu G^s[1] + lam d^-a`` with its certificate data."""

    function: GridFunction
    C: float
    lam: float
    mu: float
    delta0: float
    margin: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)

    @property
    def worst(self) -> float:
        """Smallest ``margin / scale`` over the grid."""
        return float(np.min(self.margin / self.scale))


def build_supersolution(config: LargeRunConfig, problem: LargeProblem | None = None,
                        tol: float = 1e-6) -> Supersolution:
    """Construct ``ubar`` and check ``(-Delta)^s ubar + ubar^p >= -tol * scale`` at every node.

    ``C`` is the sup of ``-(-Delta)^s d^-a / d^-ap`` over the band
    ``delta_min <= delta <= band_top * diam``; ``lam = max(C^(1/(p-1)), 1)``
    and ``mu = lam * sup |(-Delta)^s d^-a|`` beyond the band.  The local
    scale is ``mu + lam |(-Delta)^s d^-a| + ubar^p``.
    """
    if problem is None:
        problem = LargeProblem(config)
    s, p, a = config.s, config.p, config.alpha
    dom = config.domain
    grid = problem.grid
    ev = problem.evaluator

    def dpow(x):
        return dom.smooth_distance(x) ** (-a)

    x = grid.nodes
    F = apply_pointwise(dpow, s, x, evaluator=ev)
    v = dpow(x)
    delta0 = config.band_top * dom.diam
    band = grid.delta <= delta0
    ratio = -F[band] / v[band] ** p
    C = max(float(np.max(ratio)), 0.0)
    lam = max(C ** (1.0 / (p - 1.0)), 1.0)
    outside = ~band
    mu = lam * float(np.max(np.abs(F[outside]))) if np.any(outside) else 0.0
    g1 = ev.green_of_one(x)
    ubar = mu * g1 + lam * v
    margin = mu + lam * F + ubar ** p
    scale = mu + lam * np.abs(F) + ubar ** p
    bad = np.nonzero(margin < -tol * scale)[0]
    if len(bad):
        i = int(bad[np.argmin(margin[bad] / scale[bad])])
        raise SupersolutionError(
            f"supersolution inequality fails at x = {x[i, 0]:.17g} (margin {margin[i]:.3g})",
            node=x[i])

    def exact(y):
        pts = dom.as_points(y)
        return mu * ev.green_of_one(pts) + lam * dpow(pts)

    info = {"C": C, "lam": lam, "mu": mu, "delta0": delta0}
    return Supersolution(GridFunction(grid, ubar, exact, info), C, lam, mu, delta0, margin, scale)


@dataclass
class LargeResult:
    """Outcome of :func:`solve_large`."""

    u: GridFunction
    fit: RateFit
    supersolution: Supersolution
    iterates: list
    stagnation: list
    stagnant_at: int | None
    monotone_violation: float
    domination_violation: float
    bound_constant: float
    h1_ratio: np.ndarray
    h1_ratio_delta: np.ndarray


def solve_large(config: LargeRunConfig, problem: LargeProblem | None = None,
                supersolution: Supersolution | None = None) -> LargeResult:
    """Run the ``j`` schedule, check monotonicity and domination, fit the rate.

    Raises :class:`~speclap.errors.NonConvergenceError` (with the partial
    result attached) when the interior never stagnates.
    """
    if problem is None:
        problem = LargeProblem(config)
    if supersolution is None:
        supersolution = build_supersolution(config, problem)
    grid = problem.grid
    ubar = supersolution.function.values
    core = grid.delta >= config.core * config.domain.diam
    iterates, stagnation = [], []
    mono = dom_v = -math.inf
    stagnant_at = None
    prev = None
    for j in config.schedule:
        u = solve_datum_j(config, j, problem)
        iterates.append(u)
        dom_v = max(dom_v, float(np.max(u.values - ubar)))
        if prev is not None:
            mono = max(mono, float(np.max(prev.values - u.values)))
            change = float(np.max(np.abs(u.values[core] - prev.values[core]))
                           / np.max(np.abs(u.values[core])))
            stagnation.append(change)
            if stagnant_at is None and change < config.stagnation_tol:
                stagnant_at = j
        prev = u
    u = iterates[-1]
    window = config.fit_window()
    fit = fit_boundary_rate(u.values, grid.delta, window, diam=config.domain.diam)
    bound = float(np.max(u.values * grid.delta ** config.alpha))
    # extrapolate the fitted law toward the boundary and compare with h1
    dd = np.geomspace(window[0], config.delta_min, 8)
    h1v = problem.evaluator.h1(dd.reshape(-1, 1))
    ratio = fit.prefactor * dd ** fit.exponent / h1v
    result = LargeResult(u, fit, supersolution, iterates, stagnation, stagnant_at,
                         max(mono, 0.0), dom_v, bound, ratio, dd)
    if stagnant_at is None:
        raise NonConvergenceError("interior did not stagnate within the schedule",
                                  last_increment=stagnation[-1] if stagnation else None,
                                  partial=result)
    return result
