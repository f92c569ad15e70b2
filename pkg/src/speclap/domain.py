"""Model domains with explicit Dirichlet eigenbases.

Only the interval ``(0, L)`` and the rectangle ``(0, L1) x (0, L2)`` are
supported.  On these the eigenpairs, the distance to the boundary and the
boundary parameterisation are all explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigurationError

DEFAULT_TRUNCATION = {"interval": 256, "rectangle": 96}


@dataclass(frozen=True)
class Face:
    axis: int
    side: int  # 0 -> coordinate 0, 1 -> coordinate L
    normal: tuple[float, ...]

    @property
    def code(self) -> int:
        return 2 * self.axis + self.side


@dataclass(frozen=True)
class SpectralDomain:
    kind: str
    lengths: tuple[float, ...]
    truncation: tuple[int, ...]
    faces: tuple[Face, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise InvalidConfigurationError(f"unknown domain kind {self.kind!r}")
        d = 1 if self.kind == "interval" else 2
        if len(self.lengths) != d or len(self.truncation) != d:
            raise InvalidConfigurationError(
                f"{self.kind} needs {d} length(s) and truncation(s)")
        for L in self.lengths:
            if not (math.isfinite(L) and L > 0):
                raise InvalidConfigurationError(f"domain length must be positive, got {L}")
        for J in self.truncation:
            if int(J) != J or J < 1:
                raise InvalidConfigurationError(f"truncation must be a positive integer, got {J}")
        faces = []
        for axis in range(d):
            for side in (0, 1):
                nrm = [0.0] * d
                nrm[axis] = -1.0 if side == 0 else 1.0
                faces.append(Face(axis, side, tuple(nrm)))
        object.__setattr__(self, "faces", tuple(faces))

    # -- geometry ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def diam(self) -> float:
        return float(math.hypot(*self.lengths))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def perimeter(self) -> float:
        """Surface measure of the boundary (counting measure in 1D)."""
        if self.dim == 1:
            return 2.0
        return 2.0 * sum(self.lengths)

    @property
    def t_switch(self) -> float:
        """Time separating the image-sum and eigen-sum regimes."""
        return min(L * L for L in self.lengths) / (2.0 * math.pi ** 2)

    def as_points(self, x) -> np.ndarray:
        """Coerce ``x`` to an ``(n, dim)`` float array."""
        a = np.asarray(x, dtype=float)
        if self.dim == 1:
            if a.ndim == 2 and a.shape[1] == 1:
                return a
            return a.reshape(-1, 1)
        if a.shape[-1] != 2:
            raise InvalidArgumentError("rectangle points need a trailing axis of length 2")
        return a.reshape(-1, 2)

    def face_distances(self, x) -> np.ndarray:
        p = self.as_points(x)
        L = np.asarray(self.lengths)
        return np.concatenate([np.stack([p[:, k], L[k] - p[:, k]], axis=1)
                               for k in range(self.dim)], axis=1)

    def delta(self, x) -> np.ndarray:
        """Exact distance to the boundary."""
        return self.face_distances(x).min(axis=1)

    def smooth_distance(self, x, k: int = 4) -> np.ndarray:
        """Smooth distance-like function ``(sum_f d_f^-k)^(-1/k)``.

        Comparable to :meth:`delta` (``4^(-1/k) delta <= . <= delta``), equal to
        it to relative order ``(delta/d_other)^k`` near a face, and smooth in the
        interior where ``delta`` has ridges.
        """
        d = self.face_distances(x)
        m = d.min(axis=1, keepdims=True)
        return m[:, 0] * np.sum((m / d) ** k, axis=1) ** (-1.0 / k)

    def is_interior(self, x) -> np.ndarray:
        return self.delta(x) > 0

    def nearest_boundary(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Foot of the perpendicular on the closest face, and that face's code."""
        p = self.as_points(x).copy()
        d = self.face_distances(p)
        code = d.argmin(axis=1)
        L = np.asarray(self.lengths)
        for i, c in enumerate(code):
            axis, side = divmod(int(c), 2)
            p[i, axis] = 0.0 if side == 0 else L[axis]
        return p, code

    def face_of(self, z, atol: float = 1e-12) -> np.ndarray:
        """Face code of boundary points; raises if a point is not on the boundary."""
        d = self.face_distances(z)
        code = d.argmin(axis=1)
        bad = d[np.arange(len(code)), code] > atol * max(1.0, self.diam)
        if np.any(bad):
            raise InvalidArgumentError("point is not on the boundary")
        return code

    # -- eigenbasis -------------------------------------------------------

    @cached_property
    def mode_indices(self) -> np.ndarray:
        """``(M, dim)`` array of 1-based mode indices."""
        if self.dim == 1:
            return np.arange(1, self.truncation[0] + 1).reshape(-1, 1)
        j, k = np.meshgrid(np.arange(1, self.truncation[0] + 1),
                           np.arange(1, self.truncation[1] + 1), indexing="ij")
        return np.stack([j.ravel(), k.ravel()], axis=1)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        L = np.asarray(self.lengths)
        return np.sum((self.mode_indices * np.pi / L) ** 2, axis=1)

    def axis_modes(self, axis: int, x, count: int | None = None, deriv: int = 0) -> np.ndarray:
        """1D factor ``sqrt(2/L) sin(j pi x / L)`` (or its derivative), shape (n, count)."""
        L = self.lengths[axis]
        J = self.truncation[axis] if count is None else count
        k = np.arange(1, J + 1) * (np.pi / L)
        xa = np.asarray(x, dtype=float).reshape(-1, 1)
        c = math.sqrt(2.0 / L)
        if deriv == 0:
            return c * np.sin(xa * k)
        return c * k * np.cos(xa * k)

    def eigenfunctions(self, x) -> np.ndarray:
        """``phi_m(x)`` for every mode, shape (n, M)."""
        p = self.as_points(x)
        if self.dim == 1:
            return self.axis_modes(0, p[:, 0])
        a = self.axis_modes(0, p[:, 0])
        b = self.axis_modes(1, p[:, 1])
        return (a[:, :, None] * b[:, None, :]).reshape(len(p), -1)

    def inward_normal_derivatives(self, z) -> np.ndarray:
        """``-d phi_m / d nu`` at boundary points, shape (n, M)."""
        p = self.as_points(z)
        codes = self.face_of(p)
        out = np.empty((len(p), len(self.eigenvalues)))
        for i, c in enumerate(codes):
            axis, side = divmod(int(c), 2)
            sign = 1.0 if side == 0 else -1.0
            if self.dim == 1:
                out[i] = sign * self.axis_modes(0, p[i, 0], deriv=1)[0]
                continue
            fac = [self.axis_modes(k, p[i, k], deriv=int(k == axis))[0] for k in range(2)]
            fac[axis] = sign * fac[axis]
            out[i] = np.outer(fac[0], fac[1]).ravel()
        return out

    def mode_integrals(self) -> np.ndarray:
        """``int phi_m`` over the domain, analytic."""
        out = np.ones(len(self.eigenvalues))
        for axis, L in enumerate(self.lengths):
            j = self.mode_indices[:, axis]
            out *= np.where(j % 2 == 1, math.sqrt(2.0 / L) * 2.0 * L / (j * np.pi), 0.0)
        return out


def build_domain(kind: str = "interval", truncation=None, lengths=None) -> SpectralDomain:
    """Build a model domain.

    ``lengths`` defaults to ``pi`` per axis; ``truncation`` may be an int
    (applied to every axis) or one int per axis.
    """
    if kind not in DEFAULT_TRUNCATION:
        raise InvalidConfigurationError(f"unknown domain kind {kind!r}")
    d = 1 if kind == "interval" else 2
    if lengths is None:
        lengths = (math.pi,) * d
    elif np.isscalar(lengths):
        lengths = (float(lengths),) * d
    if truncation is None:
        truncation = DEFAULT_TRUNCATION[kind]
    if np.isscalar(truncation):
        truncation = (truncation,) * d
    try:
        truncation = tuple(int(t) if float(t) == int(t) else t for t in truncation)
    except (TypeError, ValueError, OverflowError):
        raise InvalidConfigurationError(f"bad truncation {truncation!r}") from None
    return SpectralDomain(kind, tuple(float(L) for L in lengths), truncation)
