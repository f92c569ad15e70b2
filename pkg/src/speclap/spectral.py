"""Spectral fields and the three realizations of the fractional operator.

* :func:`apply_spectral` multiplies eigen-coefficients by ``lambda^s``.
* :func:`apply_pointwise` evaluates the principal-value integral against the
  jumping kernel plus the killing term.
* :func:`apply_semigroup` integrates ``u - e^{t Delta} u`` against
  ``t^(-1-s)``.

All three agree on smooth functions vanishing near the boundary, which is
what :mod:`speclap.conformance` checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .domain import SpectralDomain
from .errors import (InvalidArgumentError, InvalidConfigurationError,
                     NearBoundaryEvaluationError, NumericInputError,
                     QuadratureNonConvergenceError)
from .kernels import KernelEvaluator, check_order
from .numerics import GridFunction, gauss_unit, graded_segment


@dataclass(frozen=True)
class SpectralField:
    """Function stored by its truncated eigen-coefficients.

    ``regularity`` is ``"raw"`` or ``"test-function"`` (fields of the form
    ``(-Delta)^(-s) f`` with ``f`` a compactly supported bump).
    """

    domain: SpectralDomain
    coefficients: np.ndarray
    regularity: str = "raw"

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(c) != len(self.domain.eigenvalues):
            raise InvalidArgumentError("coefficient count does not match the truncation")
        if not np.all(np.isfinite(c)):
            raise NumericInputError("non-finite spectral coefficients")
        if self.regularity not in ("raw", "test-function"):
            raise InvalidArgumentError(f"unknown regularity tag {self.regularity!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def __call__(self, x) -> np.ndarray:
        p = self.domain.as_points(x)
        if self.domain.dim == 1:
            return self.domain.axis_modes(0, p[:, 0]) @ self.coefficients
        A = self.domain.axis_modes(0, p[:, 0])
        B = self.domain.axis_modes(1, p[:, 1])
        C = self.coefficients.reshape(self.domain.truncation)
        return np.sum((A @ C) * B, axis=1)

    def gradient(self, x) -> np.ndarray:
        p = self.domain.as_points(x)
        if self.domain.dim == 1:
            return (self.domain.axis_modes(0, p[:, 0], deriv=1) @ self.coefficients)[:, None]
        C = self.coefficients.reshape(self.domain.truncation)
        A0, A1 = (self.domain.axis_modes(0, p[:, 0], deriv=d) for d in (0, 1))
        B0, B1 = (self.domain.axis_modes(1, p[:, 1], deriv=d) for d in (0, 1))
        return np.stack([np.sum((A1 @ C) * B0, axis=1), np.sum((A0 @ C) * B1, axis=1)], axis=1)

    def normal_derivative(self, z) -> np.ndarray:
        """Outward normal derivative ``d/d nu`` at boundary points."""
        return -(self.domain.inward_normal_derivatives(z) @ self.coefficients)

    def h_norm(self, s: float) -> float:
        """``sum lambda^(2s) |u_j|^2``, the squared H(2s) norm."""
        return float(np.sum(self.domain.eigenvalues ** (2.0 * s) * self.coefficients ** 2))

    def __add__(self, other):
        return SpectralField(self.domain, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return SpectralField(self.domain, self.coefficients - other.coefficients)

    def __mul__(self, c):
        return SpectralField(self.domain, float(c) * self.coefficients, self.regularity)

    __rmul__ = __mul__

    def decay_constant(self, m: float, floor: float = 1e-13) -> float:
        """``max_j |u_j| lambda_j^m`` over coefficients above the noise floor."""
        c = np.abs(self.coefficients)
        keep = c > floor * max(c.max(), 1e-300)
        if not np.any(keep):
            return 0.0
        return float(np.max(c[keep] * self.domain.eigenvalues[keep] ** m))

    def decays_faster_than(self, m: float, floor: float = 1e-13) -> bool:
        """True when ``|u_j| lambda_j^m`` is not growing across the resolved modes.

        The resolved modes (coefficients above ``floor`` relative to the
        largest) are split in half by index; the maximum over the upper half
        must not exceed the maximum over the lower half.
        """
        c = np.abs(self.coefficients)
        lam = self.domain.eigenvalues
        order = np.argsort(lam, kind="stable")
        c, lam = c[order], lam[order]
        keep = np.nonzero(c > floor * c.max())[0]
        if len(keep) < 4:
            return True
        last = keep[-1] + 1
        env = c[:last] * lam[:last] ** m
        half = last // 2
        return bool(env[half:].max() <= env[:half].max())


# --------------------------------------------------------------------------
# projection


def _axis_rule(L, J, order, breakpoints=()):
    panels = max(8, int(math.ceil(J / 2)))
    br = np.linspace(0.0, L, panels + 1)
    extra = np.asarray([b for b in breakpoints if 0 < b < L], dtype=float)
    br = np.unique(np.concatenate([br, extra]))
    t, w = gauss_unit(order)
    h = np.diff(br)
    return (br[:-1, None] + h[:, None] * t).ravel(), (h[:, None] * w).ravel()


def project(domain: SpectralDomain, f, quadrature_order: int = 16, breakpoints=None,
            regularity: str = "raw") -> SpectralField:
    """Coefficients ``u_j = int u phi_j`` by composite Gauss-Legendre quadrature.

    ``breakpoints`` (one sequence per axis) are added to the panel edges, so
    piecewise-smooth input with known kinks is integrated at full order.
    """
    if quadrature_order < 2:
        raise InvalidConfigurationError("quadrature order must be at least 2")
    if breakpoints is None:
        breakpoints = [()] * domain.dim
    elif domain.dim == 1 and np.ndim(breakpoints[0]) == 0:
        breakpoints = [breakpoints]
    rules = [_axis_rule(L, J, quadrature_order, bp)
             for L, J, bp in zip(domain.lengths, domain.truncation, breakpoints)]
    if domain.dim == 1:
        x, w = rules[0]
        v = np.asarray(f(x.reshape(-1, 1)), dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise NumericInputError("function is not finite at the quadrature nodes")
        c = domain.axis_modes(0, x).T @ (w * v)
    else:
        (x, wx), (y, wy) = rules
        X, Y = np.meshgrid(x, y, indexing="ij")
        v = np.asarray(f(np.stack([X.ravel(), Y.ravel()], axis=1)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NumericInputError("function is not finite at the quadrature nodes")
        F = v.reshape(len(x), len(y)) * np.outer(wx, wy)
        c = (domain.axis_modes(0, x).T @ F @ domain.axis_modes(1, y)).ravel()
    return SpectralField(domain, c, regularity)


# --------------------------------------------------------------------------
# spectral realization


def apply_spectral(u: SpectralField, s: float) -> SpectralField:
    """Coefficients ``lambda_j^s u_j``; ``s`` in ``(0, 1]``."""
    s = check_order(s)
    return SpectralField(u.domain, u.domain.eigenvalues ** s * u.coefficients)


def inverse_apply(data, s: float) -> SpectralField:
    """``(-Delta)^(-s)`` of a field or of a measure (anything with ``coefficients(domain)``)."""
    s = check_order(s)
    if isinstance(data, SpectralField):
        dom, c = data.domain, data.coefficients
        reg = data.regularity
    else:
        dom = data.domain
        c = data.coefficients(dom)
        reg = "raw"
    return SpectralField(dom, dom.eigenvalues ** (-s) * c, reg)


# --------------------------------------------------------------------------
# pointwise (principal value) realization


def free_jump_constant(N: int, s: float) -> float:
    """``c`` with ``J(x, y) ~ c |x - y|^(-N-2s)`` on the diagonal."""
    return s * 4.0 ** s * gamma(N / 2.0 + s) / (math.pi ** (N / 2.0) * gamma(1.0 - s))


def _as_callable(u, x0):
    if isinstance(u, GridFunction):
        g = u.grid
        if u.exact is None:
            cell = min(b[1] - b[0] for b in g.breaks)
            if np.any(g.domain.delta(x0) < cell):
                raise NearBoundaryEvaluationError(
                    "point within one grid cell of the boundary")
        return u
    if isinstance(u, SpectralField):
        return u
    if callable(u):
        return lambda p: np.asarray(u(p), dtype=float).reshape(-1)
    c = float(u)
    return lambda p: np.full(len(p), c)


def apply_pointwise(u, s: float, x, evaluator: KernelEvaluator | None = None,
                    domain: SpectralDomain | None = None, inner: float = 1e-7,
                    boundary_depth: float = 1e-14, order: int = 8):
    """``PV int (u(x) - u(y)) J(x, y) dy + kappa(x) u(x)`` at interior points.

    The ball of radius ``delta(x)/2`` around ``x`` is integrated by pairing
    antipodal points, which cancels the first-order Taylor term exactly; the
    piece ``r < inner * rho`` is replaced by its second-order Taylor value.
    The rest of the domain uses composite rules graded toward the ball and
    toward the boundary, so ``u`` may blow up like ``delta^-a`` with
    ``a < 2``.

    Parameters
    ----------
    u : GridFunction, SpectralField, callable or float
        Callables take ``(n, dim)`` points.
    s : float
        Order in ``(0, 1)``.
    x : point or array of points
    """
    s = check_order(s, allow_one=False)
    if evaluator is None:
        dom = domain if domain is not None else getattr(u, "domain", None)
        if dom is None:
            raise InvalidArgumentError("domain required for a plain callable")
        evaluator = KernelEvaluator(dom, s)
    elif abs(evaluator.s - s) > 0:
        raise InvalidConfigurationError("evaluator order differs from s")
    dom = evaluator.domain
    pts = dom.as_points(x)
    if np.any(dom.delta(pts) <= 0):
        raise NearBoundaryEvaluationError("point is not strictly interior")
    f = _as_callable(u, pts)
    out = np.array([_pointwise_1d(f, s, p, evaluator, inner, boundary_depth, order)
                    if dom.dim == 1 else
                    _pointwise_2d(f, s, p, evaluator, inner, boundary_depth, order)
                    for p in pts])
    if np.ndim(x) == 0 or (dom.dim == 2 and np.ndim(x) == 1):
        return float(out[0])
    return out


def _ball_radial(rho, inner, order):
    r, w = graded_segment(inner * rho, rho, depth_a=inner * rho, ratio=0.2, order=order)
    return r, w


def _pointwise_1d(f, s, p, K, inner, depth, order):
    L = K.domain.lengths[0]
    x = float(p[0])
    d = min(x, L - x)
    rho = 0.5 * d
    ux = float(f(np.array([[x]]))[0])
    # symmetric ball; the inner cut stays clear of the rounding scale of x
    inner = max(inner, 64.0 * np.spacing(x) / rho)
    r, w = _ball_radial(rho, inner, order)
    yp, ym = x + r, x - r
    Y = np.concatenate([yp, ym]).reshape(-1, 1)
    X = np.full_like(Y, x)
    J = K.jumping_kernel(X, Y)
    uy = f(Y)
    n = len(r)
    ball = np.dot(w, (ux - uy[:n]) * J[:n] + (ux - uy[n:]) * J[n:])
    # second-order remainder for r < inner * rho
    h = 1e-3 * rho
    u2 = f(np.array([[x - h], [x + h]]))
    d2 = (u2[0] - 2.0 * ux + u2[1]) / (h * h)
    eps = inner * rho
    ball += -d2 * free_jump_constant(1, s) * eps ** (2 - 2 * s) / (2 - 2 * s)
    # outside the ball
    yl, wl = graded_segment(0.0, x - rho, depth_a=depth * L, depth_b=1e-3 * rho, order=order)
    yr, wr = graded_segment(x + rho, L, depth_a=1e-3 * rho, depth_b=depth * L, order=order)
    Y = np.concatenate([yl, yr]).reshape(-1, 1)
    Wt = np.concatenate([wl, wr])
    J = K.jumping_kernel(np.full_like(Y, x), Y)
    outer = np.dot(Wt, (ux - f(Y)) * J)
    kap = K.killing_measure(np.array([[x]]))[0]
    return ball + outer + kap * ux


def _ray_length(p, e, L):
    with np.errstate(divide="ignore"):
        t = np.where(e > 0, (L - p) / e, np.where(e < 0, -p / e, np.inf))
    return float(np.min(t))


def _pointwise_2d(f, s, p, K, inner, depth, order):
    L = np.asarray(K.domain.lengths)
    d = float(K.domain.delta(p[None, :])[0])
    rho = 0.5 * d
    ux = float(f(p[None, :])[0])
    # angular breakpoints at the corner directions
    corners = np.array([[0, 0], [L[0], 0], [L[0], L[1]], [0, L[1]]]) - p
    ang = np.sort(np.mod(np.arctan2(corners[:, 1], corners[:, 0]), 2 * np.pi))
    ang = np.concatenate([ang, [ang[0] + 2 * np.pi]])
    tq, wq = gauss_unit(2 * order)
    th = (ang[:-1, None] + np.diff(ang)[:, None] * tq).ravel()
    wth = (np.diff(ang)[:, None] * wq).ravel()
    # ball: pair theta with theta + pi for theta in [0, pi)
    tb, wb = gauss_unit(4 * order)
    thb = np.pi * tb
    wthb = np.pi * wb
    inner = max(inner, 64.0 * float(np.max(np.spacing(p))) / rho)
    r, w = _ball_radial(rho, inner, order)
    E = np.stack([np.cos(thb), np.sin(thb)], axis=1)
    Yp = (p[None, None, :] + r[None, :, None] * E[:, None, :]).reshape(-1, 2)
    Ym = (p[None, None, :] - r[None, :, None] * E[:, None, :]).reshape(-1, 2)
    Y = np.concatenate([Yp, Ym])
    J = K.jumping_kernel(np.broadcast_to(p, Y.shape), Y)
    uy = f(Y)
    m = len(Yp)
    pair = ((ux - uy[:m]) * J[:m] + (ux - uy[m:]) * J[m:]).reshape(len(thb), len(r))
    ball = float(wthb @ pair @ (w * r))
    h = 1e-3 * rho
    st = np.array([p + [h, 0], p - [h, 0], p + [0, h], p - [0, h]])
    lap = (np.sum(f(st)) - 4.0 * ux) / (h * h)
    eps = inner * rho
    ball += -0.25 * lap * free_jump_constant(2, s) * 2 * np.pi * eps ** (2 - 2 * s) / (2 - 2 * s)
    # outer rays
    outer = 0.0
    for t_, wt_ in zip(th, wth):
        e = np.array([math.cos(t_), math.sin(t_)])
        R = _ray_length(p, e, L)
        rr, ww = graded_segment(rho, R, depth_a=1e-3 * rho, depth_b=depth * R, order=order)
        Y = p[None, :] + rr[:, None] * e[None, :]
        J = K.jumping_kernel(np.broadcast_to(p, Y.shape), Y)
        outer += wt_ * np.dot(ww * rr, (ux - f(Y)) * J)
    kap = K.killing_measure(p[None, :])[0]
    return ball + outer + kap * ux


# --------------------------------------------------------------------------
# semigroup realization


def apply_semigroup(u, s: float, x, evaluator: KernelEvaluator | None = None,
                    tol: float = 1e-9, per_efold: int = 16):
    """``s/Gamma(1-s) int_0^inf (u(x) - e^{t Delta} u(x)) t^(-1-s) dt``.

    ``u`` is a :class:`SpectralField` (propagated mode by mode with the heat
    semigroup) or a constant ``c``, for which ``u - e^{t Delta} u`` is
    ``c (1 - S(t, x))`` and the integral is ``c kappa(x)``.
    """
    s = check_order(s, allow_one=False)
    if not isinstance(u, SpectralField):
        if evaluator is None:
            raise InvalidArgumentError("constant input needs a kernel evaluator")
        return float(u) * evaluator.killing_measure(x)
    dom = u.domain
    pts = dom.as_points(x)
    if np.any(dom.delta(pts) <= 0):
        raise InvalidArgumentError("point is not strictly interior")
    lam = dom.eigenvalues
    act = np.abs(u.coefficients) > 0
    if not np.any(act):
        return _scalar(np.zeros(len(pts)), x, dom.dim)
    lo, hi = lam[act].min(), lam[act].max()
    t_min, t_max = 1e-7 / hi, 60.0 / lo
    span = math.log(t_max / t_min)
    P = int(math.ceil(span))
    tq, wq = gauss_unit(per_efold)
    uq = (np.arange(P)[:, None] + tq).ravel() / P
    t = t_min * np.exp(span * uq)
    wt = np.tile(wq, P) / P * span * t  # dt = t d(log t)
    # u(x) - e^{t Delta}u(x) = sum_j c_j phi_j(x) (1 - e^{-lambda_j t})
    phi = dom.eigenfunctions(pts)[:, act] * u.coefficients[act]
    lam_a = lam[act]
    M = -np.expm1(-np.outer(t, lam_a)) * (t ** (-1.0 - s))[:, None]
    body = phi @ (M.T @ wt)
    # (0, t_min): 1 - e^{-lt} = l t - (l t)^2/2 + ...
    small = phi @ (lam_a * t_min ** (1 - s) / (1 - s))
    small_err = np.abs(phi) @ (lam_a ** 2 * t_min ** (2 - s) / (2 * (2 - s)))
    # (t_max, inf): e^{-l t} negligible, u(x) t^(-1-s) remains
    big = phi @ np.full(len(lam_a), t_max ** (-s) / s)
    big_err = np.abs(phi) @ (np.exp(-lam_a * t_max) * t_max ** (-s) / s)
    val = (body + small + big) * s / gamma(1 - s)
    err = (small_err + big_err) * s / gamma(1 - s)
    scale = np.maximum(np.abs(val), 1e-300)
    if np.any(err > tol * np.maximum(scale, 1.0)):
        raise QuadratureNonConvergenceError("time-tail error above tolerance",
                                            last_increment=float(err.max()))
    return _scalar(val, x, dom.dim)


def _scalar(v, x, dim):
    if np.ndim(x) == 0 or (dim == 2 and np.ndim(x) == 1):
        return float(v[0])
    return v


# --------------------------------------------------------------------------
# bumps and test functions


@dataclass(frozen=True)
class Bump:
    """Compactly supported bump centred at ``center`` with radius ``radius``.

    ``kind="poly"`` is ``(1 - rho^2)^4`` (C^3, exact moments); ``kind="smooth"``
    is ``exp(1 - 1/(1 - rho^2))`` (C^infinity), where ``rho`` is the scaled
    distance to the centre.
    """

    center: tuple[float, ...]
    radius: float
    kind: str = "poly"
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise InvalidArgumentError("bump radius must be positive")
        if self.kind not in ("poly", "smooth"):
            raise InvalidArgumentError(f"unknown bump kind {self.kind!r}")

    def __call__(self, x) -> np.ndarray:
        p = np.asarray(x, dtype=float).reshape(-1, len(self.center))
        q = np.sum((p - np.asarray(self.center)) ** 2, axis=1) / self.radius ** 2
        inside = q < 1.0
        out = np.zeros(len(p))
        if self.kind == "poly":
            out[inside] = (1.0 - q[inside]) ** 4
        else:
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return self.amplitude * out

    def breakpoints(self):
        return [(c - self.radius, c + self.radius) for c in self.center]

    def fits_in(self, domain: SpectralDomain, margin: float = 0.0) -> bool:
        return all(c - self.radius > margin and c + self.radius < L - margin
                   for c, L in zip(self.center, domain.lengths))

    def project(self, domain: SpectralDomain, quadrature_order: int = 16) -> SpectralField:
        if not self.fits_in(domain):
            raise InvalidArgumentError("bump support must lie inside the domain")
        return project(domain, self, quadrature_order, self.breakpoints())


def bump_family(domain: SpectralDomain, kind: str = "poly", count: int = 5) -> list[Bump]:
    """Fixed family of bumps supported well inside the domain."""
    L = np.asarray(domain.lengths)
    rel = [(0.5, 0.25), (0.3, 0.15), (0.7, 0.18), (0.42, 0.3), (0.62, 0.22),
           (0.2, 0.1), (0.8, 0.1)]
    out = []
    for k in range(count):
        c, r = rel[k % len(rel)]
        if domain.dim == 1:
            out.append(Bump((c * L[0],), r * L[0], kind))
        else:
            c2 = rel[(k + 2) % len(rel)][0]
            out.append(Bump((c * L[0], c2 * L[1]), r * min(L) * 0.9, kind))
    return out


@dataclass(frozen=True)
class TestFunction:
    """``psi = (-Delta)^(-s) f`` for a bump ``f``, with boundary data cached.

    ``dpsi_dnu`` holds the outward normal derivative on ``boundary_nodes``;
    its negative equals ``int P^s(y, z) f(y) dy``.
    """

    __test__ = False  # not a pytest class

    bump: Bump
    s: float
    psi: SpectralField
    profile: SpectralField
    boundary_nodes: np.ndarray = field(repr=False)
    boundary_weights: np.ndarray = field(repr=False)
    dpsi_dnu: np.ndarray = field(repr=False)

    @classmethod
    def from_bump(cls, domain: SpectralDomain, bump: Bump, s: float,
                  boundary_order: int = 32) -> "TestFunction":
        fhat = bump.project(domain)
        psi = inverse_apply(fhat, s)
        psi = SpectralField(domain, psi.coefficients, "test-function")
        z, w = boundary_rule(domain, boundary_order)
        return cls(bump, s, psi, fhat, z, w, psi.normal_derivative(z))

    def __call__(self, x):
        return self.psi(x)


def boundary_rule(domain: SpectralDomain, order: int = 32):
    """Boundary quadrature: the two endpoints (counting measure) on the interval,
    composite Gauss-Legendre on each edge of the rectangle."""
    if domain.dim == 1:
        return np.array([[0.0], [domain.lengths[0]]]), np.ones(2)
    L1, L2 = domain.lengths
    pts, wts = [], []
    panels = 8
    t, w = gauss_unit(order)
    for axis, L in ((0, L1), (1, L2)):
        br = np.linspace(0.0, L, panels + 1)
        h = np.diff(br)
        u = (br[:-1, None] + h[:, None] * t).ravel()
        wu = (h[:, None] * w).ravel()
        other = L2 if axis == 0 else L1
        for side in (0.0, other):
            P = np.zeros((len(u), 2))
            P[:, axis] = u
            P[:, 1 - axis] = side
            pts.append(P)
            wts.append(wu)
    return np.concatenate(pts), np.concatenate(wts)
