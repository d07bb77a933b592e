"""Grids, complex fields and finite-difference calculus on a symmetric (x, t) lattice.

All fields are stored as complex arrays of shape ``(nx, nt)``; index ``[i, j]``
is the node ``(x_i, t_j)``.  Both node counts are odd, so the origin is a node
and the reflections ``x -> -x`` and ``(x, t) -> (-x, -t)`` are plain array
flips.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _sp_integrate

from .errors import DimensionError, ParameterError

# 4th-order first-derivative stencils, in units of 1/(12 h).
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])

# 4th-order integral over the first cell [x0, x1] from f0..f3, units of h/24.
_FIRST_CELL = np.array([9.0, 19.0, -5.0, 1.0])

DEFAULT_GRID_SPEC = (10.0, 5.0, 2001, 1001)
PARITY_THRESHOLD = 1e-3


@dataclass(frozen=True)
class Grid:
    """Uniform space-time lattice symmetric about the origin."""

    x_half_width: float
    t_half_width: float
    nx: int
    nt: int

    def __post_init__(self):
        for name in ("nx", "nt"):
            n = getattr(self, name)
            if int(n) != n or n < 5 or n % 2 == 0:
                raise ParameterError(f"{name} must be an odd integer >= 5, got {n!r}")
        if not (self.x_half_width > 0 and self.t_half_width > 0):
            raise ParameterError("grid half-widths must be positive")

    @classmethod
    def default(cls) -> "Grid":
        return cls(*DEFAULT_GRID_SPEC)

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """Build from ``"X,T,nx,nt"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ParameterError(f"grid spec must be X,T,nx,nt, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ParameterError(f"bad grid spec {text!r}: {exc}") from None

    @property
    def hx(self) -> float:
        return 2.0 * self.x_half_width / (self.nx - 1)

    @property
    def ht(self) -> float:
        return 2.0 * self.t_half_width / (self.nt - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nt)

    @property
    def x(self) -> np.ndarray:
        return -self.x_half_width + self.hx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return -self.t_half_width + self.ht * np.arange(self.nt)

    @property
    def origin(self) -> tuple[int, int]:
        return ((self.nx - 1) // 2, (self.nt - 1) // 2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays of shape ``(nx, nt)``."""
        return np.meshgrid(self.x, self.t, indexing="ij")

    def refined(self, factor: int = 2) -> "Grid":
        """Same extent with every cell split ``factor`` times."""
        return Grid(self.x_half_width, self.t_half_width,
                    factor * (self.nx - 1) + 1, factor * (self.nt - 1) + 1)

    def x_index(self, x: float) -> int:
        return int(round((x + self.x_half_width) / self.hx))

    def t_index(self, t: float) -> int:
        return int(round((t + self.t_half_width) / self.ht))

    def interior(self, band: int = 2) -> tuple[slice, slice]:
        """Slices dropping ``band`` nodes at every edge."""
        return (slice(band, self.nx - band), slice(band, self.nt - band))

    def spec(self) -> str:
        return f"{self.x_half_width:g},{self.t_half_width:g},{self.nx},{self.nt}"


class ComplexField:
    """Complex samples on a :class:`Grid`.

    Non-finite samples are never silently carried: they are zeroed in
    ``values`` and recorded in ``singular`` so downstream reductions can
    skip them and reports can flag them.
    """

    __slots__ = ("grid", "values", "singular")

    def __init__(self, grid: Grid, values, singular=None):
        arr = np.asarray(values, dtype=complex)
        if arr.ndim == 0:
            arr = np.full(grid.shape, complex(arr))
        if arr.shape != grid.shape:
            raise DimensionError(f"field shape {arr.shape} does not match grid {grid.shape}")
        bad = ~np.isfinite(arr)
        if singular is not None:
            bad = bad | np.asarray(singular, dtype=bool)
        if bad.any():
            arr = np.where(bad, 0.0, arr)
        self.grid = grid
        self.values = arr
        self.singular = bad if bad.any() else None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ComplexField":
        X, T = grid.mesh()
        with np.errstate(all="ignore"):
            return cls(grid, func(X, T))

    # -- status ------------------------------------------------------------
    @property
    def is_singular(self) -> bool:
        return self.singular is not None

    @property
    def singular_count(self) -> int:
        return 0 if self.singular is None else int(self.singular.sum())

    # -- arithmetic ----------------------------------------------------------
    def _wrap(self, values, other=None) -> "ComplexField":
        mask = self.singular
        if isinstance(other, ComplexField) and other.singular is not None:
            mask = other.singular if mask is None else (mask | other.singular)
        with np.errstate(all="ignore"):
            return ComplexField(self.grid, values, mask)

    def _other(self, other):
        if isinstance(other, ComplexField):
            if other.grid != self.grid:
                raise DimensionError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other), other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other), other)

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values, other)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other), other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        with np.errstate(all="ignore"):
            return self._wrap(self.values / self._other(other), other)

    def __rtruediv__(self, other):
        with np.errstate(all="ignore"):
            return self._wrap(self._other(other) / self.values, other)

    def __neg__(self):
        return self._wrap(-self.values)

    def __pow__(self, p):
        return self._wrap(self.values ** p)

    def conj(self) -> "ComplexField":
        return self._wrap(np.conj(self.values))

    @property
    def real(self) -> "ComplexField":
        return self._wrap(self.values.real)

    @property
    def imag(self) -> "ComplexField":
        return self._wrap(self.values.imag)

    def abs(self) -> "ComplexField":
        return self._wrap(np.abs(self.values))

    def abs2(self) -> "ComplexField":
        return self._wrap(self.values.real ** 2 + self.values.imag ** 2)

    def map(self, func) -> "ComplexField":
        with np.errstate(all="ignore"):
            return self._wrap(func(self.values))

    # -- inspection ----------------------------------------------------------
    def at(self, x: float, t: float) -> complex:
        return complex(self.values[self.grid.x_index(x), self.grid.t_index(t)])

    def max_abs(self, band: int = 0) -> float:
        v = self.values if band == 0 else self.values[self.grid.interior(band)]
        return float(np.max(np.abs(v))) if v.size else 0.0

    def __repr__(self):
        return f"ComplexField(grid={self.grid.spec()}, max|f|={self.max_abs():.3g})"


# -----------------------------------------------------------------------------
# Differentiation
# -----------------------------------------------------------------------------

class Axis(enum.Enum):
    X = "x"
    T = "t"
    XT = "xt"


def derivative_along(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """4th-order first derivative of an array along ``axis``.

    Central 5-point stencil inside, one-sided 5-point stencils on the two
    nodes nearest each edge.
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    if n < 5:
        raise DimensionError(f"need at least 5 nodes along axis {axis}, got {n}")
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    head = f[:5]
    tail = f[-5:][::-1]
    out[0] = np.tensordot(_EDGE0, head, axes=1) / (12.0 * h)
    out[1] = np.tensordot(_EDGE1, head, axes=1) / (12.0 * h)
    out[-1] = -np.tensordot(_EDGE0, tail, axes=1) / (12.0 * h)
    out[-2] = -np.tensordot(_EDGE1, tail, axes=1) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


# 4th-order second-derivative stencils, in units of 1/(12 h^2).
_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0])
_D2_EDGE0 = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0])
_D2_EDGE1 = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0])


def second_derivative_along(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """4th-order second derivative along ``axis`` (6-point one-sided at the edges)."""
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    if n < 6:
        raise DimensionError(f"need at least 6 nodes along axis {axis}, got {n}")
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * h * h)
    head = f[:6]
    tail = f[-6:][::-1]
    out[0] = np.tensordot(_D2_EDGE0, head, axes=1) / (12.0 * h * h)
    out[1] = np.tensordot(_D2_EDGE1, head, axes=1) / (12.0 * h * h)
    out[-1] = np.tensordot(_D2_EDGE0, tail, axes=1) / (12.0 * h * h)
    out[-2] = np.tensordot(_D2_EDGE1, tail, axes=1) / (12.0 * h * h)
    return np.moveaxis(out, 0, axis)


def dxx(f: ComplexField) -> ComplexField:
    """Second x-derivative with a dedicated 4th-order stencil."""
    return ComplexField(f.grid, second_derivative_along(f.values, f.grid.hx, 0), f.singular)


def differentiate(f: ComplexField, mode="x") -> ComplexField:
    """Finite-difference ``d/dx``, ``d/dt`` or ``d2/dxdt`` of a field."""
    mode = Axis(mode.value if isinstance(mode, Axis) else str(mode).lower())
    g = f.grid
    if mode is Axis.X:
        vals = derivative_along(f.values, g.hx, 0)
    elif mode is Axis.T:
        vals = derivative_along(f.values, g.ht, 1)
    else:
        vals = derivative_along(derivative_along(f.values, g.ht, 1), g.hx, 0)
    return ComplexField(g, vals, f.singular)


def dx(f: ComplexField, order: int = 1) -> ComplexField:
    for _ in range(order):
        f = differentiate(f, Axis.X)
    return f


def dt(f: ComplexField, order: int = 1) -> ComplexField:
    for _ in range(order):
        f = differentiate(f, Axis.T)
    return f


# -----------------------------------------------------------------------------
# Integration
# -----------------------------------------------------------------------------

def cumulative_simpson(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Cumulative integral from the first node, composite Simpson.

    Even nodes use Simpson pairs from node 0.  Odd nodes use a 4th-order
    cubic rule on the first cell followed by Simpson pairs from node 1, so
    every node is 4th-order accurate and the result is exactly 0 at node 0.
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    if n < 4:
        raise DimensionError("cumulative Simpson needs at least 4 nodes")
    out = np.zeros_like(f, dtype=np.result_type(f, float))
    pairs = (f[:-2] + 4.0 * f[1:-1] + f[2:]) * (h / 3.0)
    out[2::2] = np.cumsum(pairs[0::2], axis=0)
    first = np.tensordot(_FIRST_CELL, f[:4], axes=1) * (h / 24.0)
    out[1] = first
    if n > 3:
        out[3::2] = first + np.cumsum(pairs[1::2], axis=0)[: out[3::2].shape[0]]
    return np.moveaxis(out, 0, axis)


def antiderivative_x(f: ComplexField) -> ComplexField:
    """Inverse of ``d/dx`` fixed by the value 0 on the left edge ``x = -X``."""
    return ComplexField(f.grid, cumulative_simpson(f.values, f.grid.hx, axis=0), f.singular)


class Domain(enum.Enum):
    X_LINE = "x_line"
    FULL_RECT = "full_rect"


def simpson(values: np.ndarray, h: float, axis: int = 0):
    """Composite Simpson rule on an odd number of equispaced nodes."""
    return _sp_integrate.simpson(values, dx=h, axis=axis)


def integrate(f: ComplexField, domain="full_rect", t_index: int | None = None):
    """Simpson quadrature over an x-line (all t, or one ``t_index``) or the full rectangle.

    ``x_line`` without a ``t_index`` returns one complex value per t node.
    """
    domain = Domain(domain.value if isinstance(domain, Domain) else domain)
    g = f.grid
    per_t = simpson(f.values, g.hx, axis=0)
    if domain is Domain.X_LINE:
        return complex(per_t[t_index]) if t_index is not None else per_t
    return complex(simpson(per_t, g.ht, axis=0))


# -----------------------------------------------------------------------------
# Parity
# -----------------------------------------------------------------------------

class Parity(enum.Enum):
    EVEN = "Even"
    ODD = "Odd"
    MIXED = "Mixed"


class Reflection(enum.Enum):
    SPACE_TIME = "space_time"
    SPACE_ONLY = "space_only"


@dataclass(frozen=True)
class ParityReport:
    even_norm: float
    odd_norm: float
    dominant: Parity
    ratio: float

    def to_dict(self) -> dict:
        return {"even_norm": self.even_norm, "odd_norm": self.odd_norm,
                "dominant": self.dominant.value, "ratio": self.ratio}


def reflect(values: np.ndarray, kind: Reflection) -> np.ndarray:
    if kind is Reflection.SPACE_TIME:
        return values[::-1, ::-1]
    return values[::-1, :]


def l2_norm(values: np.ndarray, grid: Grid, mask: np.ndarray | None = None) -> float:
    a = np.abs(values) ** 2
    if mask is not None:
        a = a[mask]
    return float(np.sqrt(np.sum(a) * grid.hx * grid.ht))


def parity_split(f: ComplexField, kind="space_time", exclude: np.ndarray | None = None,
                 threshold: float = PARITY_THRESHOLD):
    """Split into even and odd parts under a reflection through the origin.

    ``exclude`` is an optional boolean node mask left out of the norms (it is
    symmetrised under the reflection first).  Returns ``(even, odd, report)``.
    """
    kind = Reflection(kind.value if isinstance(kind, Reflection) else kind)
    v = f.values
    mirrored = reflect(v, kind)
    even = 0.5 * (v + mirrored)
    odd = v - even
    keep = None
    if exclude is not None:
        ex = np.asarray(exclude, dtype=bool)
        keep = ~(ex | reflect(ex, kind))
    report = classify_parity(l2_norm(even, f.grid, keep), l2_norm(odd, f.grid, keep), threshold)
    return ComplexField(f.grid, even), ComplexField(f.grid, odd), report


def classify_parity(even_norm: float, odd_norm: float,
                    threshold: float = PARITY_THRESHOLD) -> ParityReport:
    big, small = max(even_norm, odd_norm), min(even_norm, odd_norm)
    ratio = 0.0 if big == 0.0 else small / big
    if ratio > threshold:
        dominant = Parity.MIXED
    else:
        dominant = Parity.EVEN if even_norm >= odd_norm else Parity.ODD
    return ParityReport(even_norm, odd_norm, dominant, ratio)


# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------

def field_csv(f: ComplexField) -> str:
    """CSV text ``x,t,re,im``; t is the outer loop, x the inner one."""
    g = f.grid
    X, T = g.mesh()
    cols = np.column_stack([X.T.ravel(), T.T.ravel(), f.values.T.real.ravel(),
                            f.values.T.imag.ravel()])
    buf = io.StringIO()
    buf.write("x,t,re,im\n")
    np.savetxt(buf, cols, fmt="%.17g", delimiter=",")
    return buf.getvalue()


@dataclass
class ConvergenceStudy:
    """Errors on successively halved grids and the observed orders between them."""

    spacings: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, h: float, err: float) -> None:
        self.spacings.append(float(h))
        self.errors.append(float(err))

    @property
    def orders(self) -> list:
        out = []
        for (h0, e0), (h1, e1) in zip(zip(self.spacings, self.errors),
                                     zip(self.spacings[1:], self.errors[1:])):
            out.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
        return out

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")
