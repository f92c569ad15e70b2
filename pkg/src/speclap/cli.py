"""``speclap`` command-line front end.

Every command writes a CSV table (header row, ``%.17g`` numbers, LF line
endings) preceded by one ``#`` line naming the tabulated quantity.  Values
come from, in increasing priority: built-in defaults, the config file
(``[common]`` then ``[<command>]`` sections of ``key = value`` lines) and
command-line flags.  Exit status is 0 on success, 2 when input is rejected
and 3 when a solver does not converge.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidConfigurationError, SpeclapError, ValidationError

COMMANDS = ("basis", "kernel", "poisson", "h1", "solve-linear", "solve-semilinear",
            "large", "trace", "verify")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


# --------------------------------------------------------------------------
# field table


@dataclass(frozen=True)
class Field:
    name: str
    kind: str  # float, int, str, floats, ints
    default: object
    help: str
    commands: tuple = COMMANDS


_GRID = ("kernel", "poisson", "solve-linear", "solve-semilinear", "large", "trace")

FIELDS = (
    Field("s", "float", 0.5, "order of the operator"),
    Field("domain", "str", "interval", "interval[:L] or rectangle[:L1,L2]; L may use pi"),
    Field("truncation", "ints", None, "eigenmodes per axis"),
    Field("n", "int", None, "grid nodes per axis", _GRID),
    Field("ratio", "float", None, "grid grading ratio", _GRID),
    Field("delta_min", "float", None, "smallest node distance to the boundary", _GRID),
    Field("near", "int", 64, "Gauss nodes on the singular time panel"),
    Field("far", "int", 16, "Gauss nodes per far time panel"),
    Field("images", "int", 8, "heat-kernel reflections per side"),
    Field("output", "str", None, "output path (default: standard output)"),
    Field("seed", "int", None, "random seed"),
    Field("kernel", "str", "green", "green | jump | heat | killing | green-of-one", ("kernel",)),
    Field("y", "floats", None, "second kernel point (default: centre)", ("kernel",)),
    Field("t", "float", None, "heat time, or strip width for trace", ("kernel", "trace")),
    Field("z", "floats", None, "boundary point (default: origin)", ("poisson",)),
    Field("count", "int", 64, "number of sample points", ("h1", "basis")),
    Field("window", "floats", None, "rate-fit window lo,hi in delta", ("h1", "large")),
    Field("measure", "str", None, "measure file", ("solve-linear", "solve-semilinear", "trace")),
    Field("nonlinearity", "str", "linear", "zero | linear | power(p)", ("solve-semilinear",)),
    Field("start", "str", "super", "super | sub", ("solve-semilinear",)),
    Field("tol", "float", 1e-8, "iteration tolerance", ("solve-semilinear",)),
    Field("p", "float", None, "absorption exponent", ("large",)),
    Field("schedule", "ints", None, "boundary levels j", ("large",)),
    Field("stagnation_tol", "float", None, "interior stagnation tolerance", ("large",)),
    Field("trials", "int", 50, "random trials per maximum-principle check", ("verify",)),
)
FIELD_MAP = {f.name: f for f in FIELDS}


def _length(text: str) -> float:
    t = text.strip().replace(" ", "")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?pi(?:/([0-9.eE+-]+))?", t)
    if m:
        a = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
        b = float(m.group(2)) if m.group(2) else 1.0
        return a * math.pi / b
    return float(t)


def _convert(f: Field, raw):
    if raw is None:
        return None
    if f.kind == "float":
        return _length(str(raw))
    if f.kind == "int":
        v = float(str(raw))
        if v != int(v):
            raise ValueError(f"{raw!r} is not an integer")
        return int(v)
    if f.kind == "floats":
        return tuple(_length(v) for v in str(raw).split(",") if v.strip())
    if f.kind == "ints":
        out = tuple(_convert(Field(f.name, "int", None, ""), v)
                    for v in str(raw).split(",") if v.strip())
        return out
    return str(raw).strip()


# --------------------------------------------------------------------------
# config file


def read_config(path: str, command: str) -> tuple[dict, list]:
    """Parse ``[section]`` / ``key = value`` text; returns values and line-anchored errors."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return {}, [f"{path}: cannot read config ({exc.strerror})"]
    common, specific, errors = {}, {}, []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([\w-]+)\]", line)
        if m:
            section = m.group(1)
            if section != "common" and section not in COMMANDS:
                errors.append(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            errors.append(f"{path}:{lineno}: expected key = value")
            continue
        if section is None:
            errors.append(f"{path}:{lineno}: key outside a section")
            continue
        key, value = (v.strip() for v in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELD_MAP:
            errors.append(f"{path}:{lineno}: unknown key {key!r}")
            continue
        if section == "common":
            common[key] = (value, f"{path}:{lineno}", True)
        elif section == command:
            specific[key] = (value, f"{path}:{lineno}", False)
    common.update(specific)
    return common, errors


# --------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


def _positive(v):
    return v > 0


CHECKS = {
    "s": (lambda v: 0 < v <= 1, "must lie in (0, 1]"),
    "truncation": (lambda v: len(v) > 0 and min(v) >= 1, "must be positive integers"),
    "n": (lambda v: v >= 16, "must be at least 16"),
    "ratio": (lambda v: 0 < v < 1, "must lie in (0, 1)"),
    "delta_min": (_positive, "must be positive"),
    "near": (lambda v: v >= 2, "must be at least 2"),
    "far": (lambda v: v >= 2, "must be at least 2"),
    "images": (lambda v: v >= 0, "must be nonnegative"),
    "kernel": (lambda v: v in ("green", "jump", "heat", "killing", "green-of-one"),
               "must be green, jump, heat, killing or green-of-one"),
    "t": (_positive, "must be positive"),
    "count": (lambda v: v >= 1, "must be at least 1"),
    "window": (lambda v: len(v) == 2 and 0 < v[0] < v[1], "must be lo,hi with 0 < lo < hi"),
    "start": (lambda v: v in ("super", "sub"), "must be super or sub"),
    "tol": (_positive, "must be positive"),
    "p": (lambda v: v > 1, "must exceed 1"),
    "schedule": (lambda v: len(v) > 0, "must list at least one level"),
    "stagnation_tol": (_positive, "must be positive"),
    "trials": (lambda v: v >= 1, "must be at least 1"),
}


def resolve(command: str, flags: dict, config_path: str | None) -> RunConfig:
    """Merge defaults, config file and flags; all problems are reported together."""
    raw, errors = ({}, []) if config_path is None else read_config(config_path, command)
    values = {}
    for f in FIELDS:
        shared = False
        if f.name in flags and flags[f.name] is not None:
            src, text = "--" + f.name.replace("_", "-"), flags[f.name]
        elif f.name in raw:
            text, src, shared = raw[f.name]
        else:
            values[f.name] = f.default
            continue
        if command not in f.commands:
            if shared:  # [common] keys apply only where meaningful
                values[f.name] = f.default
                continue
            errors.append(f"{src}: {f.name} does not apply to {command}")
            continue
        try:
            values[f.name] = _convert(f, text)
        except ValueError:
            errors.append(f"{src}: bad value {text!r} for {f.name}")
            continue
        check = CHECKS.get(f.name)
        if check is not None and not check[0](values[f.name]):
            errors.append(f"{src}: {f.name} {check[1]}, got {text!r}")
    if errors:
        raise InvalidConfigurationError("\n".join(errors))
    return RunConfig(command, values)


def _domain(cfg: RunConfig):
    from .domain import build_domain
    dom_text = cfg.domain
    kind, _, rest = dom_text.partition(":")
    kind = kind.strip()
    lengths = None
    if rest:
        try:
            parts = [_length(v) for v in re.split(r"[,x]", rest) if v.strip()]
        except ValueError:
            raise InvalidConfigurationError(f"bad domain lengths in {dom_text!r}") from None
        lengths = tuple(parts)
        if len(lengths) == 1:
            lengths = lengths[0]
    return build_domain(kind, cfg.truncation if cfg.truncation else None, lengths)


def _evaluator(cfg: RunConfig, dom, s=None):
    from .kernels import build_evaluator
    from .numerics import TimeQuadrature
    return build_evaluator(dom, cfg.s if s is None else s,
                           TimeQuadrature(near=cfg.near, far=cfg.far), images=cfg.images)


def _grid(cfg: RunConfig, dom, n=64, ratio=0.75, delta_min=None):
    from .numerics import boundary_graded_grid
    return boundary_graded_grid(dom, cfg.n or n, cfg.ratio or ratio,
                                cfg.delta_min if cfg.delta_min else delta_min)


def _measures(cfg: RunConfig, dom, required=True):
    from .dirichlet import parse_measure_file
    if cfg.measure is None:
        if required:
            raise InvalidConfigurationError(f"{cfg.command} needs --measure")
        return None, None
    try:
        with open(cfg.measure, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfigurationError(f"{cfg.measure}: cannot read ({exc.strerror})") from None
    return parse_measure_file(text, dom, cfg.measure)


# --------------------------------------------------------------------------
# tables


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


class Table:
    """CSV text with a ``#`` header line and optional extra blocks."""

    def __init__(self, title: str):
        self.buf = io.StringIO()
        self.buf.write(f"# {title}\n")

    def block(self, header, rows, note: str | None = None):
        if note is not None:
            self.buf.write(f"\n# {note}\n")
        self.buf.write(",".join(header) + "\n")
        for r in rows:
            self.buf.write(",".join(_fmt(v) for v in r) + "\n")

    def text(self) -> str:
        return self.buf.getvalue()


def _fit_block(table: Table, fit, note="rate fit"):
    table.block(("exponent", "prefactor", "r2", "window_lo", "window_hi", "points"),
                [(fit.exponent, fit.prefactor, fit.r2, fit.window[0], fit.window[1], fit.points)],
                note)


def _node_rows(grid, *columns):
    x = grid.nodes
    d = grid.delta
    return [tuple(x[i]) + (d[i],) + tuple(c[i] for c in columns) for i in range(len(d))]


def _coord_names(dom):
    return ("x",) if dom.dim == 1 else ("x1", "x2")


def write_output(text: str, path: str | None) -> None:
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".speclap-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _describe(cfg: RunConfig, dom) -> str:
    lengths = "x".join(repr(float(L)) for L in dom.lengths)
    return f"s={float(cfg.s)!r} domain={dom.kind}:{lengths}"


# --------------------------------------------------------------------------
# commands


def cmd_basis(cfg: RunConfig) -> str:
    """Dirichlet eigenvalues and their powers."""
    dom = _domain(cfg)
    idx = dom.mode_indices
    lam = dom.eigenvalues
    order = np.argsort(lam, kind="stable")[: cfg.count]
    t = Table(f"speclap basis: Dirichlet eigenvalues lambda and H(2s) weights lambda^s; "
              f"{_describe(cfg, dom)}")
    names = ("j",) if dom.dim == 1 else ("j1", "j2")
    t.block(names + ("lambda", "lambda_s"),
            [tuple(int(v) for v in idx[i]) + (lam[i], lam[i] ** cfg.s) for i in order])
    return t.text()


def cmd_kernel(cfg: RunConfig) -> str:
    """Green function, jumping kernel, heat kernel, killing measure or G^s[1] on grid nodes."""
    from .heat import HeatKernelEvaluator
    dom = _domain(cfg)
    K = _evaluator(cfg, dom)
    grid = _grid(cfg, dom)
    x = grid.nodes
    kind = cfg.kernel
    if kind in ("green", "jump", "heat"):
        y = np.asarray(cfg.y if cfg.y else [0.5 * L for L in dom.lengths], dtype=float)
        if len(y) != dom.dim:
            raise InvalidConfigurationError(f"--y needs {dom.dim} coordinate(s)")
        keep = np.any(x != y, axis=1)
        x = x[keep]
        Y = np.broadcast_to(y, x.shape)
        if kind == "green":
            v = K.green(x, Y)
            what = "Green function G^s(x, y)"
        elif kind == "jump":
            v = K.jumping_kernel(x, Y)
            what = "jumping kernel J(x, y)"
        else:
            t = 1.0 if cfg.t is None else cfg.t
            v = HeatKernelEvaluator(dom, images=cfg.images).kernel(np.full(len(x), t), x, Y)
            what = f"heat kernel p(t, x, y) at t={_fmt(t)}"
        what += " with y=" + ",".join(_fmt(c) for c in y)
    elif kind == "killing":
        v = K.killing_measure(x)
        what = "killing measure kappa(x)"
    elif kind == "green-of-one":
        v = K.green_of_one(x)
        what = "G^s applied to 1"
    else:
        raise InvalidConfigurationError(f"unknown kernel {kind!r}")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = dom.delta(x)
    t = Table(f"speclap kernel: {what}; {_describe(cfg, dom)}")
    t.block(_coord_names(dom) + ("delta", "value"),
            [tuple(x[i]) + (d[i], v[i]) for i in range(len(v))])
    return t.text()


def cmd_poisson(cfg: RunConfig) -> str:
    """Poisson kernel P^s(x, z) on grid nodes."""
    dom = _domain(cfg)
    K = _evaluator(cfg, dom)
    grid = _grid(cfg, dom)
    z = np.asarray(cfg.z if cfg.z else [0.0] * dom.dim, dtype=float)
    if len(z) != dom.dim:
        raise InvalidConfigurationError(f"--z needs {dom.dim} coordinate(s)")
    x = grid.nodes
    v = np.atleast_1d(K.poisson(x, np.broadcast_to(z, x.shape)))
    t = Table(f"speclap poisson: Poisson kernel P^s(x, z) with z=" + ",".join(_fmt(c) for c in z)
              + f"; {_describe(cfg, dom)}")
    t.block(_coord_names(dom) + ("delta", "poisson"), _node_rows(grid, v))
    return t.text()


def cmd_h1(cfg: RunConfig) -> str:
    """The function h1 near the boundary with its rate fit."""
    from .numerics import fit_boundary_rate
    dom = _domain(cfg)
    K = _evaluator(cfg, dom)
    lo, hi = cfg.window if cfg.window else (1e-3, 1e-1)
    half = 0.5 * min(dom.lengths)
    d = np.geomspace(min(lo, 1e-4 * dom.diam), half, cfg.count)
    pts = np.zeros((len(d), dom.dim))
    pts[:, 0] = d
    if dom.dim == 2:
        pts[:, 1] = 0.5 * dom.lengths[1]
    h = np.atleast_1d(K.h1(pts))
    scaled = h * d ** (2 - 2 * cfg.s)
    fit = fit_boundary_rate(h, d, (lo, hi), diam=dom.diam)
    t = Table(f"speclap h1: h1(x) = boundary integral of P^s(x, z), and delta^(2-2s) h1; "
              f"{_describe(cfg, dom)}")
    t.block(_coord_names(dom) + ("delta", "h1", "scaled"),
            [tuple(pts[i]) + (d[i], h[i], scaled[i]) for i in range(len(d))])
    _fit_block(t, fit, "rate fit of h1 against delta (target exponent -(2-2s))")
    return t.text()


def cmd_solve_linear(cfg: RunConfig) -> str:
    """Solve the linear problem with measure data."""
    from .dirichlet import solve_linear
    dom = _domain(cfg)
    mu, zeta = _measures(cfg, dom)
    K = _evaluator(cfg, dom)
    grid = _grid(cfg, dom)
    u = solve_linear(cfg.s, mu, zeta, grid, K)
    t = Table(f"speclap solve-linear: u = G^s[mu] + P^s[zeta]; {_describe(cfg, dom)}")
    t.block(_coord_names(dom) + ("delta", "u"), _node_rows(grid, u.values))
    t.block(("l1_delta", "data_scale", "stability_ratio"),
            [(u.info["l1_delta"], u.info["data_scale"], u.info["stability_ratio"])], "norms")
    return t.text()


def cmd_solve_semilinear(cfg: RunConfig) -> str:
    """Solve the semilinear problem by monotone iteration."""
    from .dirichlet import constant_boundary
    from .semilinear import nonlinearity, solve_semilinear
    dom = _domain(cfg)
    mu, zeta = _measures(cfg, dom, required=False)
    if mu is not None and not mu.is_zero:
        raise InvalidConfigurationError("solve-semilinear takes boundary data only")
    if zeta is None or zeta.is_zero:
        zeta = constant_boundary(dom)
    if cfg.start not in ("super", "sub"):
        raise InvalidConfigurationError("--start must be super or sub")
    g = nonlinearity(cfg.nonlinearity)
    K = _evaluator(cfg, dom)
    grid = _grid(cfg, dom)
    u = solve_semilinear(cfg.s, g, zeta, grid, tol=cfg.tol, start=cfg.start, evaluator=K)
    t = Table(f"speclap solve-semilinear: u = P^s[zeta] - G^s[g(u)] with g={g.name}; "
              f"{_describe(cfg, dom)}")
    t.block(_coord_names(dom) + ("delta", "u", "boundary_part"),
            _node_rows(grid, u.values, u.info["boundary_part"]))
    t.block(("iterations", "last_increment", "fixed_point_residual"),
            [(u.info["iterations"], u.info["last_increment"], u.info["fixed_point_residual"])],
            "iteration")
    return t.text()


def _large_table(cfg, config, result) -> str:
    grid = result.u.grid
    t = Table(f"speclap large: u_j with u_j/h1 = j on the boundary, last level "
              f"j={config.schedule[-1]}, and the supersolution ubar; "
              f"s={float(config.s)!r} p={float(config.p)!r}")
    t.block(("x", "delta", "u", "ubar"), _node_rows(grid, result.u.values,
                                                    result.supersolution.function.values))
    t.block(("j", "core_change"), [(j, c) for j, c in zip(config.schedule[1:],
                                                          result.stagnation)],
            "interior stagnation")
    _fit_block(t, result.fit, f"rate fit of u against delta (target exponent "
                              f"{_fmt(-config.alpha)})")
    t.block(("monotone_violation", "domination_violation", "bound_constant"),
            [(result.monotone_violation, result.domination_violation, result.bound_constant)],
            "checks")
    return t.text()


def cmd_large(cfg: RunConfig) -> str:
    """Approximate a large solution by boundary levels j."""
    from .large import LargeRunConfig, solve_large
    if cfg.p is None:
        raise InvalidConfigurationError("large needs --p")
    dom = _domain(cfg)
    kw = {}
    for name in ("schedule", "stagnation_tol", "n", "ratio", "delta_min"):
        if getattr(cfg, name) is not None:
            kw[name] = getattr(cfg, name)
    if cfg.window:
        kw["window"] = cfg.window
    config = LargeRunConfig(cfg.s, cfg.p, domain=dom, **kw)
    try:
        result = solve_large(config)
    except ConvergenceError as exc:
        if exc.partial is not None:
            write_output(_large_table(cfg, config, exc.partial), cfg.output)
        raise
    return _large_table(cfg, config, result)


def cmd_trace(cfg: RunConfig) -> str:
    """Weighted boundary trace of the linear solution."""
    from .dirichlet import boundary_trace, constant_boundary, solve_linear
    dom = _domain(cfg)
    mu, zeta = _measures(cfg, dom, required=False)
    if mu is None:
        zeta = constant_boundary(dom)
    K = _evaluator(cfg, dom)
    grid = _grid(cfg, dom)
    u = solve_linear(cfg.s, mu, zeta, grid, K)
    rep = boundary_trace(u, cfg.s, t=cfg.t, evaluator=K)
    t = Table(f"speclap trace: strip averages (1/t) int_(delta<t) u/h1 and their "
              f"extrapolated limit; {_describe(cfg, dom)}")
    t.block(("width", "average"), list(zip(rep.widths, rep.values)))
    t.block(("limit",), [(rep.limit,)], "extrapolated trace")
    return t.text()


def cmd_verify(cfg: RunConfig) -> str:
    """Run the identity and bound checks and write CSV."""
    from .conformance import DEFAULT_SEED, run_conformance
    dom = _domain(cfg)
    seed = DEFAULT_SEED if cfg.seed is None else cfg.seed
    rep = run_conformance(cfg.s, seed=seed, trials=cfg.trials, domain=dom)
    head = (f"# speclap verify: identity and bound checks; {_describe(cfg, dom)} seed={seed} "
            f"passed={'true' if rep.passed else 'false'}\n")
    return head + rep.to_csv()


HANDLERS = {
    "basis": cmd_basis, "kernel": cmd_kernel, "poisson": cmd_poisson, "h1": cmd_h1,
    "solve-linear": cmd_solve_linear, "solve-semilinear": cmd_solve_semilinear,
    "large": cmd_large, "trace": cmd_trace, "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speclap",
                                     description="Spectral fractional Laplacian on model domains.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__doc__ or name)
        p.add_argument("--config", default=None, help="config file")
        for f in FIELDS:
            if name in f.commands:
                p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                               help=f.help)
    return parser


def _check_threads():
    v = os.environ.get("SPECLAP_THREADS")
    if v is None:
        return
    try:
        ok = int(v) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise InvalidConfigurationError(f"SPECLAP_THREADS must be a positive integer, got {v!r}")


def run(command: str, cfg: RunConfig) -> int:
    text = HANDLERS[command](cfg)
    write_output(text, cfg.output)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        _check_threads()
        cfg = resolve(args.command, flags, args.config)
        return run(args.command, cfg)
    except ValidationError as exc:
        print(f"speclap {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"speclap {args.command}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except SpeclapError as exc:  # pragma: no cover - every error has a subclass above
        print(f"speclap {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
