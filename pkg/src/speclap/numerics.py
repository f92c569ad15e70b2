"""Quadrature rules, boundary-graded grids and boundary-rate fitting.

The grids are composite Gauss-Legendre rules whose panels shrink
geometrically toward every face, so that functions blowing up like a power
of the distance to the boundary are integrated accurately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .domain import SpectralDomain
from .errors import (FitDomainError, InvalidArgumentError,
                     InvalidConfigurationError, NumericInputError)

DEFAULT_RATIO = 0.75
DEFAULT_ORDER = 4


@lru_cache(maxsize=None)
def gauss_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class TimeQuadrature:
    """Plan for integrals ``int_0^T f(t) t^a dt`` with a singular start.

    ``(0, t0]`` is mapped to ``(0, 1]`` by ``t = t0 tau`` and handled by a
    ``near``-point Gauss rule; ``[t0, T]`` is split into panels of at most
    ``far_width`` e-folds in ``log t``, each with a ``far``-point rule.
    """

    near: int = 64
    far: int = 16
    far_width: float = 2.5
    min_far: int = 3

    def __post_init__(self):
        if self.near < 2 or self.far < 2 or self.min_far < 1 or not self.far_width > 0:
            raise InvalidConfigurationError("bad time-quadrature parameters")

    @cached_property
    def near_rule(self):
        return gauss_unit(self.near)

    @cached_property
    def far_rule(self):
        return gauss_unit(self.far)


def graded_segment(a: float, b: float, depth_a=None, depth_b=None, ratio: float = 0.25,
                   order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on ``[a, b]`` with panels shrinking toward the ends.

    ``depth_a`` / ``depth_b`` are the widths of the smallest panel at each end
    (``None`` means no grading there).  Panel widths change by ``ratio``.
    """
    if not b > a:
        return np.zeros(0), np.zeros(0)
    length = b - a
    mid = 0.5 * (a + b)
    # keep every node at least a few ulps away from the ends
    floor = 16.0 * np.spacing(max(abs(a), abs(b))) / (ratio * gauss_unit(order)[0][0])

    def side(depth):
        if depth is not None:
            depth = max(depth, floor)
        if depth is None or depth >= 0.5 * length:
            return np.array([0.0, 0.5 * length])
        k = max(1, int(math.ceil(math.log(depth / (0.5 * length)) / math.log(ratio))))
        w = 0.5 * length * ratio ** np.arange(k, 0, -1)
        return np.concatenate([[0.0], w, [0.5 * length]])

    left = a + side(depth_a)
    right = b - side(depth_b)[::-1]
    br = np.unique(np.concatenate([left[left < mid], [mid], right[right > mid]]))
    t, w = gauss_unit(order)
    h = np.diff(br)
    return ((br[:-1, None] + h[:, None] * t).ravel(), (h[:, None] * w).ravel())


# --------------------------------------------------------------------------
# graded grids


def _half_breaks(half: float, panels: int, ratio: float) -> np.ndarray:
    k = np.arange(1, panels + 1)
    return np.concatenate([[0.0], half * ratio ** (panels - k)])


def graded_breaks(L: float, panels_per_half: int, ratio: float, delta_min: float,
                  order: int) -> tuple[np.ndarray, float]:
    """Panel breakpoints on ``[0, L]`` graded toward both ends.

    Returns the breakpoints and the ratio actually used; the ratio is raised
    when needed so that no node lies closer than ``delta_min`` to an end.
    """
    xi = gauss_unit(order)[0][0]
    half = 0.5 * L
    r = ratio
    if panels_per_half > 1 and half * r ** (panels_per_half - 1) * xi < delta_min:
        r = (delta_min / (half * xi)) ** (1.0 / (panels_per_half - 1))
        if r >= 1.0:
            raise InvalidConfigurationError("delta_min too large for this grid")
    left = _half_breaks(half, panels_per_half, r)
    return np.concatenate([left, L - left[-2::-1]]), r


@dataclass(frozen=True)
class Grid:
    """Tensor-product composite Gauss-Legendre grid on a model domain."""

    domain: SpectralDomain
    order: int
    breaks: tuple[np.ndarray, ...]
    ratio: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs, ws = zip(*(self._axis_rule(b) for b in self.breaks))
        object.__setattr__(self, "axis_nodes", xs)
        object.__setattr__(self, "axis_weights", ws)
        if self.domain.dim == 1:
            nodes = xs[0].reshape(-1, 1)
            weights = ws[0]
        else:
            X, Y = np.meshgrid(xs[0], xs[1], indexing="ij")
            nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
            weights = np.outer(ws[0], ws[1]).ravel()
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def _axis_rule(self, b):
        t, w = gauss_unit(self.order)
        h = np.diff(b)
        x = (b[:-1, None] + h[:, None] * t[None, :]).ravel()
        return x, (h[:, None] * w[None, :]).ravel()

    @property
    def size(self) -> int:
        return len(self.weights)

    @cached_property
    def delta(self) -> np.ndarray:
        return self.domain.delta(self.nodes)

    def panel_of(self, axis: int, x) -> np.ndarray:
        b = self.breaks[axis]
        return np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(b) - 2)


def boundary_graded_grid(domain: SpectralDomain, n: int = 64, ratio: float = DEFAULT_RATIO,
                         delta_min: float | None = None, order: int = DEFAULT_ORDER) -> Grid:
    """Boundary-graded grid with ``n`` nodes per axis.

    ``n`` must be a multiple of ``2 * order``; nodes cluster geometrically
    (panel widths scale by ``ratio``) toward each face.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 16):
        raise InvalidConfigurationError(f"grid size must be an integer >= 16, got {n!r}")
    if not (0.0 < ratio < 1.0):
        raise InvalidConfigurationError(f"grading ratio must lie in (0, 1), got {ratio}")
    if order < 2 or n % (2 * order):
        raise InvalidConfigurationError(f"grid size must be a multiple of {2 * order}")
    if delta_min is None:
        delta_min = 1e-4 * domain.diam
    if not (delta_min > 0):
        raise InvalidConfigurationError("delta_min must be positive")
    breaks, used = [], ratio
    for L in domain.lengths:
        b, r = graded_breaks(L, n // (2 * order), ratio, delta_min, order)
        breaks.append(b)
        used = max(used, r)
    return Grid(domain, order, tuple(breaks), used)


# --------------------------------------------------------------------------
# grid functions


def _lagrange(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lagrange basis on ``nodes`` evaluated at ``x``; shape (len(x), len(nodes))."""
    d = x[:, None] - nodes[None, :]
    out = np.ones((len(x), len(nodes)))
    for k in range(len(nodes)):
        for m in range(len(nodes)):
            if m != k:
                out[:, k] *= d[:, m] / (nodes[k] - nodes[m])
    return out


@dataclass(frozen=True)
class GridFunction:
    """Values on a graded grid.

    ``exact`` optionally evaluates the same function off the grid (solvers
    attach their representation formula here); interpolation is by the panel
    polynomials and reproduces node values exactly.
    """

    grid: Grid
    values: np.ndarray
    exact: object = field(default=None, repr=False, compare=False)
    info: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) != self.grid.size:
            raise InvalidArgumentError("values do not match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def domain(self) -> SpectralDomain:
        return self.grid.domain

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def interpolate(self, x) -> np.ndarray:
        p = self.domain.as_points(x)
        g = self.grid
        m = g.order
        if self.domain.dim == 1:
            k = g.panel_of(0, p[:, 0])
            out = np.empty(len(p))
            for kk in np.unique(k):
                sel = k == kk
                ln = _lagrange(g.axis_nodes[0][kk * m:(kk + 1) * m], p[sel, 0])
                out[sel] = ln @ self.values[kk * m:(kk + 1) * m]
            return out
        n1 = len(g.axis_nodes[1])
        V = self.values.reshape(-1, n1)
        k0 = g.panel_of(0, p[:, 0])
        k1 = g.panel_of(1, p[:, 1])
        out = np.empty(len(p))
        for i in range(len(p)):
            a = _lagrange(g.axis_nodes[0][k0[i] * m:(k0[i] + 1) * m], p[i:i + 1, 0])[0]
            b = _lagrange(g.axis_nodes[1][k1[i] * m:(k1[i] + 1) * m], p[i:i + 1, 1])[0]
            out[i] = a @ V[k0[i] * m:(k0[i] + 1) * m, k1[i] * m:(k1[i] + 1) * m] @ b
        return out

    def __call__(self, x) -> np.ndarray:
        if self.exact is not None:
            return np.asarray(self.exact(self.domain.as_points(x)), dtype=float)
        return self.interpolate(x)

    def integral(self, weight="one", power=None) -> float:
        return weighted_integral(self, weight=weight, power=power)

    def __add__(self, other):
        return _combine(self, other, 1.0, 1.0)

    def __sub__(self, other):
        return _combine(self, other, 1.0, -1.0)

    def __mul__(self, c):
        c = float(c)
        ex = None if self.exact is None else (lambda x, f=self.exact: c * f(x))
        return GridFunction(self.grid, c * self.values, ex)

    __rmul__ = __mul__


def _combine(a, b, ca, cb):
    if a.grid is not b.grid:
        raise InvalidArgumentError("grid functions live on different grids")
    ex = None
    if a.exact is not None and b.exact is not None:
        ex = lambda x, f=a.exact, g=b.exact: ca * f(x) + cb * g(x)  # noqa: E731
    return GridFunction(a.grid, ca * a.values + cb * b.values, ex)


def sample(grid: Grid, f) -> GridFunction:
    """Grid function from a callable of ``(n, dim)`` points, keeping it as ``exact``."""
    v = np.asarray(f(grid.nodes), dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NumericInputError("function is not finite on the grid")
    return GridFunction(grid, v, f)


def weighted_integral(u, weight="one", power=None, grid: Grid | None = None) -> float:
    """``int |u|^power w dx`` with ``w`` in {1, delta}.

    ``u`` is a :class:`GridFunction` or an array of node values (``grid``
    then required).  Without ``power`` the signed integral ``int u w`` is
    returned.
    """
    if isinstance(u, GridFunction):
        grid, v = u.grid, u.values
    else:
        if grid is None:
            raise InvalidArgumentError("node values need a grid")
        v = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NumericInputError("non-finite values in weighted integral")
    if power is not None:
        v = np.abs(v) ** float(power)
    if weight in ("one", 1, "1", None):
        w = grid.weights
    elif weight in ("delta", "δ"):
        w = grid.weights * grid.delta
    else:
        raise InvalidArgumentError(f"unknown weight {weight!r}")
    return float(np.dot(v, w))


# --------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit ``value ~ prefactor * delta**exponent``."""

    exponent: float
    prefactor: float
    r2: float
    window: tuple[float, float]
    points: int


def fit_boundary_rate(values, delta, window, diam: float | None = None,
                      min_points: int = 8) -> RateFit:
    """Log-log least squares of ``values`` against ``delta`` inside ``window``.

    ``values`` may be a :class:`GridFunction`, in which case ``delta`` is
    ignored and taken from its grid.
    """
    if isinstance(values, GridFunction):
        diam = values.domain.diam if diam is None else diam
        delta = values.grid.delta
        values = values.values
    v = np.asarray(values, dtype=float).reshape(-1)
    d = np.asarray(delta, dtype=float).reshape(-1)
    lo, hi = float(window[0]), float(window[1])
    if not (0 < lo < hi) or (diam is not None and hi > diam / 4):
        raise FitDomainError(f"fit window ({lo:g}, {hi:g}) must lie in (0, diam/4)")
    sel = (d >= lo) & (d <= hi)
    if sel.sum() < min_points:
        raise FitDomainError(f"only {int(sel.sum())} samples in the fit window")
    if np.any(~(v[sel] > 0)):
        raise FitDomainError("non-positive value inside the fit window")
    X = np.log(d[sel])
    Y = np.log(v[sel])
    A = np.stack([X, np.ones_like(X)], axis=1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ coef
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 if ss == 0 else 1.0 - float(res @ res) / ss
    return RateFit(float(coef[0]), float(math.exp(coef[1])), r2, (lo, hi), int(sel.sum()))


def log_window_points(lo: float, hi: float, count: int) -> np.ndarray:
    return np.geomspace(lo, hi, count)
