"""Semilinear absorption problems and Kato's inequality.

We solve ``(-Delta)^s u + g(x, u) = 0`` with weighted boundary datum
``zeta``.  Writing ``u = P - v`` with ``P = int P^s(., z) dzeta(z)``, the
unknown ``v = G^s[g(., P - v)]`` is found by a shifted monotone iteration:

    (I + A diag(c_k)) v_{k+1} = A [g(P - v_k) + c_k v_k],

where ``A`` discretizes ``G^s`` and ``c >= d g / d t`` on ``[0, P]``.  For
``c = 0`` this is the plain Picard step, which alternates around the
solution; the shift makes the step order preserving, so the iterates from
``0`` and from ``P`` bracket the solution and close in on it monotonically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dirichlet import BoundaryMeasure, GreenOperator, solve_linear
from .errors import (InvalidArgumentError, InvalidNonlinearityError,
                     NonConvergenceError)
from .kernels import KernelEvaluator, check_order
from .numerics import Grid, GridFunction, graded_segment, weighted_integral
from .spectral import Bump, TestFunction, apply_spectral


@dataclass(frozen=True)
class Nonlinearity:
    """Absorption term ``g(x, t)``.

    Parameters
    ----------
    name : str
    func : callable
        ``func(x, t)`` with ``x`` of shape (n, dim) and ``t`` of shape (n,).
    deriv : callable
        ``d func / d t``.
    monotone : bool
        ``g`` is nondecreasing in ``t``.
    exponent : float
        Growth exponent of the majorant ``h(t) = t^exponent`` (0 for bounded g).
    """

    name: str
    func: object = field(repr=False)
    deriv: object = field(repr=False)
    monotone: bool = True
    exponent: float = 1.0

    def __call__(self, x, t):
        return self.func(x, t)

    def majorant(self, t):
        return np.abs(t) ** self.exponent

    def certificate(self, s: float) -> bool:
        """``int h(delta^-(2-2s)) delta dx < inf``, i.e. ``exponent < 1/(1-s)``."""
        if self.exponent == 0 or s == 1.0:
            return True
        return self.exponent * (2.0 - 2.0 * s) < 2.0

    def check_probes(self, x, t) -> None:
        """Raise if ``g(x, 0) != 0`` or monotonicity fails on the probes."""
        x = np.asarray(x, dtype=float)
        if np.any(self.func(x, np.zeros(len(x))) != 0):
            raise InvalidNonlinearityError("g(x, 0) must vanish")
        if self.monotone:
            t = np.sort(np.asarray(t, dtype=float))
            for a, b in zip(t[:-1], t[1:]):
                ga = self.func(x, np.full(len(x), a))
                gb = self.func(x, np.full(len(x), b))
                if np.any(gb < ga):
                    raise InvalidNonlinearityError("g flagged monotone but decreases")


def zero():
    return Nonlinearity("zero", lambda x, t: np.zeros_like(np.asarray(t, dtype=float)),
                        lambda x, t: np.zeros_like(np.asarray(t, dtype=float)), True, 0.0)


def linear(c: float = 1.0):
    c = float(c)
    if c < 0:
        raise InvalidNonlinearityError("absorption coefficient must be nonnegative")
    return Nonlinearity(f"linear({c:g})" if c != 1 else "linear",
                        lambda x, t: c * np.asarray(t, dtype=float),
                        lambda x, t: np.full_like(np.asarray(t, dtype=float), c), True, 1.0)


def power(p: float):
    """``g(t) = t_+^p``."""
    p = float(p)
    if not p >= 1:
        raise InvalidNonlinearityError("power nonlinearity needs p >= 1")
    return Nonlinearity(f"power({p:g})",
                        lambda x, t: np.maximum(np.asarray(t, dtype=float), 0.0) ** p,
                        lambda x, t: p * np.maximum(np.asarray(t, dtype=float), 0.0) ** (p - 1),
                        True, p)


def nonlinearity(text: str) -> Nonlinearity:
    """Registry lookup: ``zero``, ``linear``, ``power(p)``."""
    text = text.strip()
    if text == "zero":
        return zero()
    if text == "linear":
        return linear()
    m = re.fullmatch(r"power\(\s*([^)]+)\)", text)
    if m:
        try:
            p = float(m.group(1))
        except ValueError:
            raise InvalidNonlinearityError(f"bad exponent in {text!r}") from None
        return power(p)
    raise InvalidNonlinearityError(f"unknown nonlinearity {text!r}")


@dataclass
class Iteration:
    """Record of a monotone iteration."""

    iterates: list
    increments: list
    converged: bool


def solve_semilinear(s: float, g: Nonlinearity, zeta: BoundaryMeasure, grid: Grid,
                     tol: float = 1e-8, max_iter: int = 500, start: str = "super",
                     evaluator: KernelEvaluator | None = None,
                     operator: GreenOperator | None = None, boundary_part=None,
                     keep_iterates: bool = False, layer: bool = True,
                     scheme: str = "monotone") -> GridFunction:
    """Solve ``(-Delta)^s u + g(x, u) = 0`` with boundary datum ``zeta``.

    ``start="super"`` begins at ``u = P^s zeta`` (so ``v_0 = 0``) and produces
    a nonincreasing sequence of ``u``; ``start="sub"`` begins at ``u = 0``
    and produces a nondecreasing one.  ``scheme="newton"`` uses the shift
    ``c_k = g'(u_k)`` instead; it converges faster but only the sub start
    stays monotone.  Iteration stops when the weighted L1
    norm of the increment falls below ``tol``.

    With ``layer`` (interval only) the absorption carried by the first panel
    at each end, where ``g(P)`` is singular, is corrected by
    :class:`BoundaryLayer`.  When the boundary part carries an ``exact``
    evaluator, so does the result (Nystrom interpolation).

    ``info`` of the result holds the iteration count, the last increment,
    the boundary part ``P`` and, when ``keep_iterates``, every ``u_k``.
    """
    s = check_order(s, allow_one=False)
    if start not in ("super", "sub"):
        raise InvalidArgumentError("start must be 'super' or 'sub'")
    if scheme not in ("monotone", "newton"):
        raise InvalidArgumentError("scheme must be 'monotone' or 'newton'")
    if not g.certificate(s):
        raise InvalidNonlinearityError(
            f"{g.name}: h(delta^-(2-2s)) delta is not integrable (need exponent < {1 / (1 - s):g})")
    dom = grid.domain
    if operator is None:
        if evaluator is None:
            evaluator = KernelEvaluator(dom, s)
        operator = GreenOperator(evaluator, grid)
    evaluator = operator.evaluator
    if boundary_part is None:
        boundary_part = solve_linear(s, None, zeta, grid, evaluator)
    P_exact = getattr(boundary_part, "exact", None)
    P = np.asarray(getattr(boundary_part, "values", boundary_part), dtype=float)
    if np.any(P < 0):
        raise InvalidArgumentError("boundary datum must be nonnegative")
    x = grid.nodes
    g.check_probes(x[:1], np.array([0.0, 1.0, 2.0]))
    A = operator.matrix
    bl = BoundaryLayer(g, P, grid, evaluator, A) if layer else None
    wd = grid.weights * grid.delta
    n = len(P)
    v = np.zeros(n) if start == "super" else P.copy()
    # nodewise bound for g' on [0, P]: the shifted step is then order preserving
    c_fixed = np.max([g.deriv(x, f * P) for f in np.linspace(0.0, 1.0, 9)], axis=0)
    iterates = [P - v] if keep_iterates else []
    increments = []
    eye = np.eye(n)
    converged = False
    violation = 0.0
    for _ in range(max_iter):
        u = P - v
        c = g.deriv(x, u) if scheme == "newton" else c_fixed
        r = g(x, u) + c * v
        src = bl.source(u) if bl is not None else 0.0
        v_new = np.linalg.solve(eye + A * c[None, :], A @ r + src)
        # the discrete step is only approximately order preserving; record
        # how far it moves against the expected direction
        back = (v - v_new) if start == "super" else (v_new - v)
        violation = max(violation, float(back.max()))
        # the solution lies in [0, P]; project overshoots back into the bracket
        v_new = np.clip(v_new, 0.0, P)
        inc = float(np.dot(np.abs(v_new - v), wd))
        v = v_new
        increments.append(inc)
        if keep_iterates:
            iterates.append(P - v)
        if inc < tol:
            converged = True
            break
    u = P - v
    src = bl.source(u) if bl is not None else 0.0
    resid = float(np.dot(np.abs(v - A @ g(x, u) - src), wd))
    if converged and resid > max(100.0 * tol, 1e-6 * float(np.dot(P, wd))):
        converged = False
    info = {"fixed_point_residual": resid, "monotonicity_violation": violation, "iterations": len(increments), "last_increment": increments[-1] if increments else 0.0,
            "boundary_part": P, "start": start, "increments": increments}
    if keep_iterates:
        info["iterates"] = iterates
    if not converged:
        raise NonConvergenceError(f"no convergence in {max_iter} iterations"
                                  f" (fixed-point residual {resid:.3g})",
                                  last_increment=increments[-1], partial=GridFunction(grid, u))
    exact = None
    if P_exact is not None:
        gu = g(x, u)

        def exact(y):
            pts = dom.as_points(y)
            R = operator.rows(pts)
            out = P_exact(pts) - R @ gu
            if bl is not None:
                out -= BoundaryLayer(g, P, grid, evaluator, R, targets=pts).source(u)
            return out

    return GridFunction(grid, u, exact, info)


class BoundaryLayer:
    """Correction for the end panels of ``int G^s(x, y) g(y, u(y)) dy``.

    Near a face ``u = P - v`` with ``P ~ delta^-b``, ``b = 2-2s``, and, for
    growth exponent ``q``, ``v ~ delta^-c`` with ``c = b q - 2s``.  So
    ``g(u)`` can be too singular for the panel interpolant behind ``A``.
    On the panel touching each face ``u`` is modelled by

        P_1 t^-b - (P_1 - u_1) t^-c,    t = delta / delta_1,

    anchored at the node nearest the face (the second term is dropped when
    ``c <= 0``, where ``v`` stays bounded).  ``c < b`` is the integrability
    condition ``q < 1/(1-s)``, so the model tends to ``P``.
    :meth:`source` returns, row by row, the integral of ``G^s`` against ``g``
    of the model minus what ``A`` gives for it.  Only the interval is
    handled; on the rectangle the source is zero.
    """

    def __init__(self, g: Nonlinearity, P, grid: Grid, evaluator: KernelEvaluator,
                 A: np.ndarray, targets=None, depth: float = 1e-12, order: int = 12):
        self.g = g
        self.grid = grid
        self.P = np.asarray(P, dtype=float)
        self.A = A
        dom = grid.domain
        self.active = dom.dim == 1 and g.exponent > 0
        if not self.active:
            return
        s = evaluator.s
        self.beta = 2.0 - 2.0 * s
        self.gamma = self.beta * g.exponent - 2.0 * s
        L = dom.lengths[0]
        m = grid.order
        nodes = grid.axis_nodes[0]
        br = grid.breaks[0]
        x = grid.nodes[:, 0] if targets is None else dom.as_points(targets)[:, 0]
        self.faces = []
        for face in (0, 1):
            sl = slice(0, m) if face == 0 else slice(len(nodes) - m, len(nodes))
            d = nodes[sl] if face == 0 else L - nodes[sl]
            k = int(np.argmin(d))
            width = float(br[1] - br[0]) if face == 0 else float(br[-1] - br[-2])
            eps = depth * width
            z = 0.0 if face == 0 else L
            rows = []
            for xi in x:
                di = xi if face == 0 else L - xi
                gap = 1e-8 * di
                if di < width:
                    y1, w1 = graded_segment(eps, di, depth_a=eps, depth_b=gap, order=order)
                    y2, w2 = graded_segment(di, width, depth_a=gap, order=order)
                    y, w = np.concatenate([y1, y2]), np.concatenate([w1, w2])
                else:
                    y, w = graded_segment(eps, width, depth_a=eps, order=order)
                # reflect so that tiny distances to the face stay representable
                xr = xi if face == 0 else L - xi
                keep = y != xr
                gv = evaluator.green(np.full((keep.sum(), 1), xr), y[keep].reshape(-1, 1))
                rows.append((y[keep], w[keep] * gv))
            pois = evaluator.poisson(x.reshape(-1, 1), np.full((len(x), 1), z))
            self.faces.append(dict(sl=sl, d=d, k=k, eps=eps, z=z, rows=rows, pois=pois))

    def _model(self, f, u, delta):
        d1 = f["d"][f["k"]]
        P1 = self.P[f["sl"]][f["k"]]
        u1 = min(max(float(u[f["sl"]][f["k"]]), 0.0), P1)
        r = np.asarray(delta, dtype=float) / d1
        if self.gamma > 0:
            val = P1 * r ** (-self.beta) - (P1 - u1) * r ** (-self.gamma)
        else:
            val = u1 * r ** (-self.beta)
        val = np.maximum(val, 0.0)
        zp = np.full((np.size(delta), 1), f["z"])
        return self.g(zp, np.ravel(val)).reshape(np.shape(delta))

    def source(self, u, with_matrix=True) -> np.ndarray:
        n = len(self.faces[0]["rows"]) if self.active else self.grid.size
        out = np.zeros(n)
        if not self.active:
            return out
        q = self.g.exponent
        for f in self.faces:
            exact = np.array([np.dot(w, self._model(f, u, y)) for y, w in f["rows"]])
            # (0, eps): G = delta P^s(x, z) and the model is a pure power
            q = self.g.exponent * self.beta
            if q < 2.0:
                exact += f["pois"] * self._model(f, u, f["eps"]) * f["eps"] ** 2 / (2.0 - q)
            out += exact
            if with_matrix:
                out -= self.A[:, f["sl"]] @ self._model(f, u, f["d"])
        return out


# --------------------------------------------------------------------------
# Kato's inequality


def smoothed_positive_part(j: float):
    """``Phi_j(t) = sqrt(t^2 + 1/j^2)/2 + t/2 - 1/(2j)`` and its derivative."""
    j = float(j)

    def phi(t):
        return 0.5 * np.sqrt(t * t + 1.0 / j ** 2) + 0.5 * t - 0.5 / j

    def dphi(t):
        return 0.5 * t / np.sqrt(t * t + 1.0 / j ** 2) + 0.5

    return phi, dphi


def square():
    return (lambda t: t * t), (lambda t: 2.0 * t)


def identity():
    return (lambda t: t), (lambda t: np.ones_like(t))


def kato_check(f, Phi, dPhi, bump: Bump, s: float, order: int = 24) -> float:
    """Slack ``int f Phi'(w) psi - int Phi(w) (-Delta)^s psi`` with ``w = G^s f``.

    ``f`` is a :class:`~speclap.spectral.SpectralField`; ``w`` and ``psi``
    are evaluated from their eigen-expansions.  ``psi = (-Delta)^(-s) bump``,
    so ``(-Delta)^s psi`` is the bump itself.  Nonnegative slack (up to
    quadrature error) is Kato's inequality.
    """
    from .spectral import inverse_apply
    s = check_order(s)
    dom = f.domain
    tf = TestFunction.from_bump(dom, bump, s)
    w = inverse_apply(f, s)
    xq, wq = _uniform_rule(dom, order)
    wv = w(xq)
    rhs = np.dot(wq, f(xq) * dPhi(wv) * tf.psi(xq))
    Aspsi = apply_spectral(tf.psi, s)(xq)
    lhs = np.dot(wq, Phi(wv) * Aspsi)
    return float(rhs - lhs)


def _uniform_rule(dom, order):
    from .numerics import gauss_unit
    t, w = gauss_unit(order)
    rules = []
    for L, J in zip(dom.lengths, dom.truncation):
        P = max(16, int(math.ceil(J / 2)))
        br = np.linspace(0.0, L, P + 1)
        h = np.diff(br)
        rules.append(((br[:-1, None] + h[:, None] * t).ravel(), (h[:, None] * w).ravel()))
    if dom.dim == 1:
        return rules[0][0].reshape(-1, 1), rules[0][1]
    (x, wx), (y, wy) = rules
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1), np.outer(wx, wy).ravel()


def weighted_l1(u, grid: Grid) -> float:
    return weighted_integral(np.abs(np.asarray(u)), "delta", grid=grid)
