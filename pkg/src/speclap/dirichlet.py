"""Linear Dirichlet problems with measure data.

The solution of ``(-Delta)^s u = mu`` with weighted boundary datum ``zeta``
is the superposition

    u(x) = int G^s(x, y) dmu(y) + int P^s(x, z) dzeta(z),

evaluated node by node on a boundary-graded grid.  Densities are integrated
against the Green function by product integration (panel polynomials times
the exact kernel, with auxiliary rules graded toward the singularity).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .domain import SpectralDomain
from .errors import (InvalidArgumentError, InvalidMeasureError,
                     ResolutionError)
from .kernels import KernelEvaluator, check_order
from .numerics import (Grid, GridFunction, _lagrange, gauss_unit, graded_segment,
                       weighted_integral)
from .spectral import Bump, TestFunction, boundary_rule, project

# --------------------------------------------------------------------------
# measures

INTERIOR_PROFILES = {
    "one": lambda p: np.ones(len(p)),
}

BOUNDARY_PROFILES = {
    "one": lambda z: np.ones(len(z)),
    "ramp": lambda z: 1.0 + z[:, 0] / (1.0 + np.abs(z[:, 0])),
}


def _interior_profile(name: str, domain: SpectralDomain):
    if name == "delta":
        return domain.delta
    if name == "sine":
        L = np.asarray(domain.lengths)
        return lambda p: np.prod(np.sin(np.pi * p / L), axis=1)
    if name in INTERIOR_PROFILES:
        return INTERIOR_PROFILES[name]
    m = re.fullmatch(r"bump\(([^)]*)\)", name)
    if m:
        vals = [float(v) for v in m.group(1).split(",")]
        if len(vals) != domain.dim + 1:
            raise InvalidMeasureError(f"bump profile needs {domain.dim + 1} numbers")
        b = Bump(tuple(vals[:-1]), vals[-1])
        if not b.fits_in(domain):
            raise InvalidMeasureError("bump support leaves the domain")
        return b
    raise InvalidMeasureError(f"unknown interior density profile {name!r}")


def _boundary_profile(name: str):
    if name in BOUNDARY_PROFILES:
        return BOUNDARY_PROFILES[name]
    raise InvalidMeasureError(f"unknown boundary density profile {name!r}")


@dataclass(frozen=True)
class InteriorMeasure:
    """Finite list of interior atoms plus an optional density (callable on points)."""

    domain: SpectralDomain
    atoms: tuple = ()
    density: object = None

    def __post_init__(self):
        clean = []
        for y, w in self.atoms:
            p = self.domain.as_points(y)[0]
            if not np.all(np.isfinite(p)) or not math.isfinite(float(w)):
                raise InvalidMeasureError("non-finite atom")
            if self.domain.delta(p[None, :])[0] <= 0:
                raise InvalidMeasureError("interior atom must lie strictly inside the domain")
            clean.append((tuple(float(v) for v in p), float(w)))
        object.__setattr__(self, "atoms", tuple(clean))

    @property
    def atom_points(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms]).reshape(-1, self.domain.dim)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms], dtype=float)

    def coefficients(self, domain: SpectralDomain) -> np.ndarray:
        c = np.zeros(len(domain.eigenvalues))
        if self.atoms:
            c += domain.eigenfunctions(self.atom_points).T @ self.atom_weights
        if self.density is not None:
            c += project(domain, self.density).coefficients
        return c

    def scale(self, grid: Grid | None = None) -> float:
        """``int delta d|mu|`` (density part on ``grid`` when given)."""
        v = float(np.sum(np.abs(self.atom_weights) * self.domain.delta(self.atom_points))) \
            if self.atoms else 0.0
        if self.density is not None and grid is not None:
            v += weighted_integral(np.abs(self.density(grid.nodes)), "delta", grid=grid)
        return v

    def __mul__(self, c):
        c = float(c)
        dens = None if self.density is None else (lambda p, f=self.density: c * f(p))
        return InteriorMeasure(self.domain, tuple((y, c * w) for y, w in self.atoms), dens)

    __rmul__ = __mul__

    def __add__(self, other):
        if self.density is None:
            dens = other.density
        elif other.density is None:
            dens = self.density
        else:
            dens = lambda p, f=self.density, g=other.density: f(p) + g(p)  # noqa: E731
        return InteriorMeasure(self.domain, self.atoms + other.atoms, dens)

    @property
    def is_zero(self) -> bool:
        return not self.atoms and self.density is None


@dataclass(frozen=True)
class BoundaryMeasure:
    """Boundary atoms plus an optional density on the boundary.

    On the interval the boundary is two points with counting measure, so a
    density is just its two endpoint values.
    """

    domain: SpectralDomain
    atoms: tuple = ()
    density: object = None

    def __post_init__(self):
        clean = []
        for z, w in self.atoms:
            p = self.domain.as_points(z)
            try:
                self.domain.face_of(p)
            except InvalidArgumentError:
                raise InvalidMeasureError("boundary atom is not on the boundary") from None
            if not math.isfinite(float(w)):
                raise InvalidMeasureError("non-finite atom weight")
            clean.append((tuple(float(v) for v in p[0]), float(w)))
        object.__setattr__(self, "atoms", tuple(clean))

    @property
    def atom_points(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms]).reshape(-1, self.domain.dim)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms], dtype=float)

    def quadrature(self, order: int = 32):
        """Points and weights representing the whole measure."""
        pts = [self.atom_points]
        wts = [self.atom_weights]
        if self.density is not None:
            z, w = boundary_rule(self.domain, order)
            pts.append(z)
            wts.append(w * np.asarray(self.density(z), dtype=float))
        return np.concatenate(pts), np.concatenate(wts)

    def total_variation(self) -> float:
        z, w = self.quadrature()
        return float(np.sum(np.abs(w)))

    def __mul__(self, c):
        c = float(c)
        dens = None if self.density is None else (lambda z, f=self.density: c * f(z))
        return BoundaryMeasure(self.domain, tuple((z, c * w) for z, w in self.atoms), dens)

    __rmul__ = __mul__

    def __add__(self, other):
        if self.density is None:
            dens = other.density
        elif other.density is None:
            dens = self.density
        else:
            dens = lambda z, f=self.density, g=other.density: f(z) + g(z)  # noqa: E731
        return BoundaryMeasure(self.domain, self.atoms + other.atoms, dens)

    @property
    def is_zero(self) -> bool:
        return not self.atoms and self.density is None


def constant_boundary(domain: SpectralDomain, value: float = 1.0) -> BoundaryMeasure:
    """``zeta = value * sigma`` (surface measure times a constant)."""
    v = float(value)
    return BoundaryMeasure(domain, (), lambda z: np.full(len(z), v))


def parse_measure_file(text: str, domain: SpectralDomain, source: str = "<measure>"):
    """Parse the plain-text measure format.

    Sections ``[interior]`` and ``[boundary]`` hold lines
    ``atom <coords...> <weight>`` or ``density <profile> [scale]``.  Lines
    starting with ``#`` and blank lines are ignored.
    """
    section = None
    atoms = {"interior": [], "boundary": []}
    dens = {"interior": [], "boundary": []}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1).lower()
            if section not in atoms:
                errors.append(f"{source}:{lineno}: unknown section [{section}]")
                section = None
            continue
        if section is None:
            errors.append(f"{source}:{lineno}: entry outside [interior]/[boundary]")
            continue
        parts = line.split()
        try:
            if parts[0] == "atom":
                nums = [float(v) for v in parts[1:]]
                if len(nums) != domain.dim + 1:
                    raise ValueError(f"atom needs {domain.dim} coordinate(s) and a weight")
                pt = domain.as_points(np.asarray(nums[:-1]))
                if section == "interior" and not domain.delta(pt)[0] > 0:
                    raise ValueError("interior atom must lie strictly inside the domain")
                if section == "boundary":
                    domain.face_of(pt)
                atoms[section].append((tuple(nums[:-1]), nums[-1]))
            elif parts[0] == "density":
                if len(parts) not in (2, 3):
                    raise ValueError("density needs a profile name and an optional scale")
                scale = float(parts[2]) if len(parts) == 3 else 1.0
                f = (_interior_profile(parts[1], domain) if section == "interior"
                     else _boundary_profile(parts[1]))
                dens[section].append(lambda p, f=f, c=scale: c * np.asarray(f(p), dtype=float))
            else:
                raise ValueError(f"unknown entry {parts[0]!r}")
        except (ValueError, InvalidMeasureError, InvalidArgumentError) as exc:
            errors.append(f"{source}:{lineno}: {exc}")
    if errors:
        raise InvalidMeasureError("\n".join(errors))

    def merged(fs):
        if not fs:
            return None
        return lambda p: sum(f(p) for f in fs)

    try:
        mu = InteriorMeasure(domain, tuple(atoms["interior"]), merged(dens["interior"]))
        zeta = BoundaryMeasure(domain, tuple(atoms["boundary"]), merged(dens["boundary"]))
    except InvalidMeasureError as exc:
        raise InvalidMeasureError(f"{source}: {exc}") from None
    return mu, zeta


# --------------------------------------------------------------------------
# Green operator on a grid


def _singular_mass(s: float, eps: float) -> float:
    """``int_0^eps`` of the diagonal singularity of the 1D Green function."""
    if s < 0.5:
        c = gamma(0.5 - s) / (4.0 ** s * math.sqrt(math.pi) * gamma(s))
        return c * eps ** (2 * s) / (2 * s)
    if s == 0.5:
        return -eps * (math.log(eps) - 1.0) / math.pi
    return 0.0


class GreenOperator:
    """Discrete ``f -> int G^s(., y) f(y) dy`` on a graded grid.

    ``matrix[i, j]`` integrates ``G^s(x_i, .)`` against the panel Lagrange
    polynomial of node ``j``.  Panels within ``near`` panels of the target
    use product integration; farther panels use the grid weights.  On the
    rectangle a plain Nystrom rule is used with the self-cell replaced by
    the integral of the leading singularity over a disk of equal area.
    """

    def __init__(self, evaluator: KernelEvaluator, grid: Grid, near: int = 2,
                 depth: float = 1e-14, order: int = 8):
        if evaluator.domain != grid.domain:
            raise InvalidArgumentError("evaluator and grid use different domains")
        self.evaluator = evaluator
        self.grid = grid
        self.near = near
        self.depth = depth
        self.order = order
        self._matrix = None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.rows(self.grid.nodes, on_nodes=True)
            self._matrix.setflags(write=False)
        return self._matrix

    def apply(self, values) -> np.ndarray:
        return self.matrix @ np.asarray(values, dtype=float)

    def rows(self, x, on_nodes=False) -> np.ndarray:
        pts = self.grid.domain.as_points(x)
        if self.grid.domain.dim == 1:
            return self._rows_1d(pts[:, 0])
        return self._rows_2d(pts, on_nodes)

    def _rows_1d(self, x):
        g = self.grid
        b = g.breaks[0]
        m = g.order
        nodes = g.axis_nodes[0]
        npan = len(b) - 1
        n = len(nodes)
        K = self.evaluator
        rows = np.zeros((len(x), n))
        # far part: plain weights, corrected below for near panels
        far_pairs_x, far_pairs_y = np.repeat(x, n), np.tile(nodes, len(x))
        same = far_pairs_x == far_pairs_y
        gv = np.zeros(len(far_pairs_x))
        kx = g.panel_of(0, x)
        pan_of_node = np.repeat(np.arange(npan), m)
        near_mask = np.abs(kx[:, None] - pan_of_node[None, :]) <= self.near
        use = ~near_mask.ravel() & ~same
        if np.any(use):
            gv[use] = K.green(far_pairs_x[use, None], far_pairs_y[use, None])
        rows += (gv.reshape(len(x), n) * g.weights[None, :]) * ~near_mask
        # near panels: product integration
        ax, ay, aw, arow, apan = [], [], [], [], []
        for i, xi in enumerate(x):
            eps = 4096.0 * np.spacing(abs(xi))
            for k in range(max(0, kx[i] - self.near), min(npan, kx[i] + self.near + 1)):
                lo, hi = b[k], b[k + 1]
                if lo < xi < hi:
                    y1, w1 = graded_segment(lo, xi - eps, depth_b=max(self.depth * (xi - lo), eps),
                                            ratio=0.2, order=self.order)
                    y2, w2 = graded_segment(xi + eps, hi, depth_a=max(self.depth * (hi - xi), eps),
                                            ratio=0.2, order=self.order)
                    yy, ww = np.concatenate([y1, y2]), np.concatenate([w1, w2])
                    # the two skipped pieces of length eps, leading singularity only
                    lag = _lagrange(nodes[k * m:(k + 1) * m], np.array([xi]))[0]
                    rows[i, k * m:(k + 1) * m] += 2.0 * _singular_mass(K.s, eps) * lag
                elif xi <= lo:
                    yy, ww = graded_segment(lo, hi, depth_a=max(lo - xi, self.depth * (hi - lo)),
                                            ratio=0.2, order=self.order)
                else:
                    yy, ww = graded_segment(lo, hi, depth_b=max(xi - hi, self.depth * (hi - lo)),
                                            ratio=0.2, order=self.order)
                ax.append(np.full(len(yy), xi))
                ay.append(yy)
                aw.append(ww)
                arow.append(np.full(len(yy), i))
                apan.append(np.full(len(yy), k))
        ax, ay, aw = map(np.concatenate, (ax, ay, aw))
        arow, apan = np.concatenate(arow), np.concatenate(apan)
        gv = K.green(ax[:, None], ay[:, None]) * aw
        for k in np.unique(apan):
            sel = apan == k
            lag = _lagrange(nodes[k * m:(k + 1) * m], ay[sel])
            contrib = lag * gv[sel, None]
            for c in range(m):
                np.add.at(rows[:, k * m + c], arow[sel], contrib[:, c])
        return rows

    def _rows_2d(self, x, on_nodes):
        g = self.grid
        K = self.evaluator
        n = g.size
        X = np.repeat(x, n, axis=0)
        Y = np.tile(g.nodes, (len(x), 1))
        same = np.all(X == Y, axis=1)
        gv = np.zeros(len(X))
        gv[~same] = K.green(X[~same], Y[~same])
        rows = gv.reshape(len(x), n) * g.weights[None, :]
        if np.any(same):
            s = K.s
            w = np.tile(g.weights, len(x))[same]
            R = np.sqrt(w / math.pi)
            if s == 1.0:
                c = 1.0 / (2.0 * math.pi)
                self_int = c * math.pi * R ** 2 * (0.5 - np.log(R))
            else:
                c = gamma(1.0 - s) / (4.0 ** s * math.pi * gamma(s))
                self_int = c * 2.0 * math.pi * R ** (2.0 * s) / (2.0 * s)
            idx = np.nonzero(same.reshape(len(x), n))
            rows[idx] = self_int
        return rows


# --------------------------------------------------------------------------
# linear solver


def _density_values(mu: InteriorMeasure, grid: Grid) -> np.ndarray:
    return np.asarray(mu.density(grid.nodes), dtype=float)


def _density_potential_1d(evaluator: KernelEvaluator, density, x: np.ndarray,
                          order: int = 6, depth: float = 1e-8) -> np.ndarray:
    """``int G^s(x, y) rho(y) dy`` on the interval by direct quadrature.

    Uses the density itself instead of its panel interpolant.  Each side of
    ``x`` gets the same reference rule, graded toward the boundary and toward
    ``x``, so all targets are handled in one kernel call.
    """
    L = evaluator.domain.lengths[0]
    t, w = graded_segment(0.0, 1.0, depth, depth, ratio=0.2, order=order)
    x = x[:, 0]
    ys = np.hstack([x[:, None] * t, x[:, None] + (L - x)[:, None] * t])
    ws = np.hstack([x[:, None] * w, (L - x)[:, None] * w])
    X = np.repeat(x, ys.shape[1])[:, None]
    Y = ys.reshape(-1, 1)
    vals = evaluator.green(X, Y) * np.asarray(density(Y), dtype=float)
    return (vals.reshape(ys.shape) * ws).sum(axis=1)


def solve_linear(s: float, mu: InteriorMeasure | None, zeta: BoundaryMeasure | None,
                 grid: Grid, evaluator: KernelEvaluator | None = None,
                 operator: GreenOperator | None = None) -> GridFunction:
    """Representation-formula solution on ``grid``.

    The returned grid function carries the same formula as its ``exact``
    evaluator.  ``info`` holds ``l1_delta`` (the weighted L1 norm),
    ``data_scale`` (``int delta d|mu| + |zeta|``), their ratio, and the mask
    of nodes coinciding with an atom (set to NaN and excluded from norms).
    """
    s = check_order(s)
    dom = grid.domain
    if evaluator is None:
        evaluator = operator.evaluator if operator is not None else KernelEvaluator(dom, s)
    if abs(evaluator.s - s) > 0:
        raise InvalidArgumentError("evaluator order differs from s")
    if mu is None:
        mu = InteriorMeasure(dom)
    if zeta is None:
        zeta = BoundaryMeasure(dom)
    if mu.domain != dom or zeta.domain != dom:
        raise InvalidMeasureError("measure defined on another domain")
    rho = None
    if mu.density is not None:
        if operator is None:
            operator = GreenOperator(evaluator, grid)
        rho = _density_values(mu, grid)
    zq, zw = zeta.quadrature()
    yq, yw = mu.atom_points, mu.atom_weights

    def evaluate(x, node_rows=None):
        p = dom.as_points(x)
        out = np.zeros(len(p))
        bad = np.zeros(len(p), dtype=bool)
        if len(yw):
            X = np.repeat(p, len(yw), axis=0)
            Y = np.tile(yq, (len(p), 1))
            hit = np.all(X == Y, axis=1)
            gv = np.zeros(len(X))
            if np.any(~hit):
                gv[~hit] = evaluator.green(X[~hit], Y[~hit])
            out += (gv.reshape(len(p), -1) * yw).sum(axis=1)
            bad |= hit.reshape(len(p), -1).any(axis=1)
        if rho is not None:
            if node_rows is not None:
                out += node_rows @ rho
            elif dom.dim == 1:
                out += _density_potential_1d(evaluator, mu.density, p)
            else:
                out += operator.rows(p) @ rho
        if len(zw):
            X = np.repeat(p, len(zw), axis=0)
            Z = np.tile(zq, (len(p), 1))
            pv = evaluator.poisson(X, Z)
            out += (pv.reshape(len(p), -1) * zw).sum(axis=1)
        out[bad] = np.nan
        return out

    vals = evaluate(grid.nodes, None if rho is None else operator.matrix)
    singular = ~np.isfinite(vals)
    ok = ~singular
    l1 = float(np.sum(np.abs(vals[ok]) * grid.weights[ok] * grid.delta[ok]))
    scale = mu.scale(grid) + zeta.total_variation()
    info = {
        "s": s,
        "l1_delta": l1,
        "data_scale": scale,
        "stability_ratio": l1 / scale if scale > 0 else 0.0,
        "singular_nodes": singular,
    }
    return GridFunction(grid, vals, lambda x: evaluate(x), info)


# --------------------------------------------------------------------------
# weak formulation


def _support_rule(bump: Bump, domain: SpectralDomain, order: int = 12, singular=()):
    """Tensor Gauss rule on the bounding box of a bump's support.

    On the interval the rule is split at the ``singular`` points and graded
    toward them (atoms make ``u`` singular there).
    """
    rules = []
    for axis, (c, L) in enumerate(zip(bump.center, domain.lengths)):
        lo, hi = max(c - bump.radius, 0.0), min(c + bump.radius, L)
        if domain.dim == 1 and len(singular):
            cuts = sorted(float(v) for v in np.ravel(singular) if lo < v < hi)
            edges = [lo] + cuts + [hi]
            parts = []
            for a, b in zip(edges[:-1], edges[1:]):
                da = 1e-12 * (b - a) if a in cuts else None
                db = 1e-12 * (b - a) if b in cuts else None
                parts.append(graded_segment(a, b, da, db, ratio=0.2, order=order))
            rules.append((np.concatenate([q[0] for q in parts]),
                          np.concatenate([q[1] for q in parts])))
            continue
        br = np.linspace(lo, hi, 9)
        t, w = gauss_unit(order)
        h = np.diff(br)
        rules.append(((br[:-1, None] + h[:, None] * t).ravel(), (h[:, None] * w).ravel()))
    if domain.dim == 1:
        return rules[0][0].reshape(-1, 1), rules[0][1]
    (x, wx), (y, wy) = rules
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1), np.outer(wx, wy).ravel()


def weak_residual(u, mu: InteriorMeasure | None, zeta: BoundaryMeasure | None, f,
                  s: float, grid: Grid | None = None) -> float:
    """``int u (-Delta)^s psi - int psi dmu + int (d psi / d nu) dzeta``.

    ``psi = (-Delta)^(-s) f`` for the bump ``f``, so the first term is
    ``int u f``.  ``f`` may also be a prepared :class:`TestFunction`.
    """
    s = check_order(s)
    if isinstance(u, GridFunction):
        dom = u.domain
        grid = u.grid
    else:
        if grid is None:
            raise InvalidArgumentError("callable u needs a grid")
        dom = grid.domain
    tf = f if isinstance(f, TestFunction) else TestFunction.from_bump(dom, f, s)
    if abs(tf.s - s) > 0:
        raise InvalidArgumentError("test function built for another order")
    bump = tf.bump
    if callable(u) and (not isinstance(u, GridFunction) or u.exact is not None):
        sing = mu.atom_points[:, 0] if (mu is not None and mu.atoms and dom.dim == 1) else ()
        xq, wq = _support_rule(bump, dom, singular=sing)
        uv = np.asarray(u(xq), dtype=float)
        first = float(np.dot(wq, uv * bump(xq)))
    else:
        first = float(np.dot(grid.weights, u.values * bump(grid.nodes)))
    second = 0.0
    if mu is not None:
        if mu.atoms:
            second += float(np.dot(mu.atom_weights, tf.psi(mu.atom_points)))
        if mu.density is not None:
            if grid is None:
                raise InvalidArgumentError("interior density needs a grid")
            second += float(np.dot(grid.weights, _density_values(mu, grid) * tf.psi(grid.nodes)))
    third = 0.0
    if zeta is not None and not zeta.is_zero:
        zq, zw = zeta.quadrature()
        third = float(np.dot(zw, tf.psi.normal_derivative(zq)))
    return first - second + third


def data_scale(mu: InteriorMeasure | None, zeta: BoundaryMeasure | None,
               grid: Grid | None = None) -> float:
    v = 0.0
    if mu is not None:
        v += float(np.sum(np.abs(mu.atom_weights)))
        if mu.density is not None and grid is not None:
            v += weighted_integral(np.abs(mu.density(grid.nodes)), "one", grid=grid)
    if zeta is not None:
        v += zeta.total_variation()
    return v


# --------------------------------------------------------------------------
# weighted boundary traces


@dataclass(frozen=True)
class TraceReport:
    widths: tuple[float, ...]
    values: tuple[float, ...]
    limit: float


def strip_average(u, t: float, evaluator: KernelEvaluator, weight=None,
                  grid: Grid | None = None, order: int = 16) -> float:
    """``(1/t) int_{delta < t} (u / h1) phi dx``.

    The strip is integrated by a dedicated rule graded toward the boundary.
    When ``u`` is known only at grid nodes, the bounded ratio ``u / h1`` is
    interpolated by the panel polynomials (interpolating ``u`` itself would
    misrepresent its boundary blow-up).
    """
    dom = evaluator.domain
    phi = (lambda p: np.ones(len(p))) if weight is None else weight
    pts, w = _strip_rule(dom, t, order)
    exact = callable(u) and (not isinstance(u, GridFunction) or u.exact is not None)
    if exact:
        ratio = np.asarray(u(pts), dtype=float) / evaluator.h1(pts)
    else:
        g = u.grid if isinstance(u, GridFunction) else grid
        if g is None:
            raise InvalidArgumentError("node values need a grid")
        if not np.any(g.delta < t):
            raise ResolutionError(f"no grid nodes within distance {t:g} of the boundary")
        vals = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
        ratio = GridFunction(g, vals / evaluator.h1(g.nodes)).interpolate(pts)
    return float(np.dot(w, ratio * np.asarray(phi(pts), dtype=float))) / t


def _strip_rule(dom: SpectralDomain, t: float, order: int):
    y, w = graded_segment(0.0, t, depth_a=1e-6 * t, ratio=0.2, order=order)
    if dom.dim == 1:
        L = dom.lengths[0]
        return np.concatenate([y, L - y[::-1]]).reshape(-1, 1), np.concatenate([w, w[::-1]])
    pts, wts = [], []
    L1, L2 = dom.lengths
    tq, wq = gauss_unit(order)
    for axis, (La, Lb) in enumerate(((L1, L2), (L2, L1))):
        # strip along the faces normal to `axis`; the tangential range is split
        # so that each point is counted once (closest face wins)
        br = np.linspace(0.0, Lb, 17)
        h = np.diff(br)
        tu = (br[:-1, None] + h[:, None] * tq).ravel()
        tw = (h[:, None] * wq).ravel()
        for side in (0, 1):
            nn = y if side == 0 else La - y
            P = np.zeros((len(y) * len(tu), 2))
            P[:, axis] = np.repeat(nn, len(tu))
            P[:, 1 - axis] = np.tile(tu, len(y))
            W = np.repeat(w, len(tu)) * np.tile(tw, len(y))
            d = dom.face_distances(P)
            mine = d.argmin(axis=1) == 2 * axis + side
            pts.append(P[mine])
            wts.append(W[mine])
    return np.concatenate(pts), np.concatenate(wts)


def boundary_trace(u, s: float, weight=None, t: float | None = None,
                   evaluator: KernelEvaluator | None = None, grid: Grid | None = None,
                   delta_min: float | None = None) -> TraceReport:
    """Strip averages at ``t, t/2, t/4`` and their Richardson extrapolation.

    The extrapolation removes error terms linear and quadratic in ``t``.
    """
    s = check_order(s)
    dom = u.domain if isinstance(u, GridFunction) else (grid.domain if grid else None)
    if evaluator is None:
        if dom is None:
            raise InvalidArgumentError("need a domain")
        evaluator = KernelEvaluator(dom, s)
    dom = evaluator.domain
    if delta_min is None:
        delta_min = 1e-4 * dom.diam
    if t is None:
        t = 0.05 * dom.diam
    if not (4 * delta_min < t < dom.diam / 8):
        raise InvalidArgumentError("strip width must lie in (4 delta_min, diam/8)")
    ts = (t, t / 2, t / 4)
    vals = tuple(strip_average(u, tt, evaluator, weight, grid) for tt in ts)
    r1a = 2 * vals[1] - vals[0]
    r1b = 2 * vals[2] - vals[1]
    limit = (4 * r1b - r1a) / 3
    return TraceReport(ts, vals, float(limit))


# --------------------------------------------------------------------------
# L^p scan


@dataclass(frozen=True)
class LpScan:
    p: float
    threshold: float
    probes: tuple[float, ...]
    values: tuple[float, ...]
    stabilizes: bool
    grows: bool

    @property
    def sup(self) -> float:
        return max(self.values)


def lp_integral(evaluator: KernelEvaluator, y, p: float, order: int = 12) -> float:
    """``int (G(x, y)/delta(y))^p delta(x) dx`` on the interval."""
    dom = evaluator.domain
    if dom.dim != 1:
        raise InvalidArgumentError("the L^p scan is implemented on the interval")
    L = dom.lengths[0]
    yv = float(y)
    dy = min(yv, L - yv)
    eps = 4096.0 * np.spacing(yv)
    x1, w1 = graded_segment(0.0, yv - eps, depth_a=1e-12 * L, depth_b=max(1e-12 * yv, eps),
                            ratio=0.2, order=order)
    x2, w2 = graded_segment(yv + eps, L, depth_a=max(1e-12 * (L - yv), eps), depth_b=1e-12 * L,
                            ratio=0.2, order=order)
    x = np.concatenate([x1, x2])
    w = np.concatenate([w1, w2])
    g = evaluator.green(x[:, None], np.full((len(x), 1), yv))
    return float(np.dot(w, (g / dy) ** p * np.minimum(x, L - x)))


def lp_threshold_scan(s: float, p: float, probes=None, evaluator: KernelEvaluator | None = None,
                      domain: SpectralDomain | None = None) -> LpScan:
    """``I(y) = int (G^s(x,y)/delta(y))^p delta(x) dx`` as the probe ``y`` nears the boundary.

    ``stabilizes`` means the successive increments shrink geometrically and
    the last one is below 2 % of the value; ``grows`` means the values
    increase monotonically with the last ratio above 1.2.
    """
    s = check_order(s)
    if not p >= 1:
        raise InvalidArgumentError("p must be at least 1")
    if evaluator is None:
        if domain is None:
            raise InvalidArgumentError("need a domain or an evaluator")
        evaluator = KernelEvaluator(domain, s)
    if probes is None:
        probes = np.geomspace(1e-1, 1e-5, 5)
    probes = tuple(float(y) for y in probes)
    vals = tuple(lp_integral(evaluator, y, p) for y in probes)
    N = evaluator.domain.dim
    thr = (N + 1) / (N + 1 - 2 * s)
    v = np.asarray(vals)
    inc = np.abs(np.diff(v))
    stab = bool(len(v) >= 3 and np.all(inc[1:] <= 0.7 * inc[:-1] + 1e-300)
                and inc[-1] <= 0.02 * abs(v[-1]))
    grows = bool(np.all(np.diff(v) > 0) and v[-1] / v[-2] > 1.2)
    return LpScan(float(p), thr, probes, vals, stab, grows)
