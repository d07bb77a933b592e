"""The sl(2) loop algebra, gauge rotation of the Lax pair, and quasi-conserved charges.

Basis elements of grade n:

    b^n   = lam^n s3
    F1^n  = lam^n (kappa s+ - s-) / sqrt(2)
    F2^n  = lam^n (kappa s+ + s-) / sqrt(2)

with brackets [b^m, F1^n] = 2 F2^{m+n}, [b^m, F2^n] = 2 F1^{m+n},
[F1^m, F2^n] = kappa b^{m+n}.  The spatial Lax component reads

    L = -i b^1 + A+ / (2 sqrt 2) F1^0 + A- / (2 sqrt 2) F2^0,    A+- = A/kappa +- A*.

A gauge transformation g = exp(J), J = sum_n a1^{-n} F1^{-n} + a2^{-n} F2^{-n},
removes the F components of L grade by grade (the Image) and leaves the
b components beta_L^{-n} (the Kernel), whose x-integrals are the charges.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlgebraError, ParameterError
from .numerics import (ComplexField, Grid, derivative_along, second_derivative_along,
                       simpson)
from .solutions import AbSolution

SQRT2 = math.sqrt(2.0)
DEFAULT_FLOOR = -4
SUPPORTED_CHARGES = (1, 2, 3, 4)
ANOMALY_FLOOR = 1e-6


# -----------------------------------------------------------------------------
# LoopElement
# -----------------------------------------------------------------------------

def _zero_like(*vals):
    for v in vals:
        if isinstance(v, np.ndarray):
            return np.zeros_like(v, dtype=complex)
    return 0j


class LoopElement:
    """Grade-indexed coefficients ``{n: (c_b, c_f1, c_f2)}``.

    Coefficients are complex scalars or arrays that broadcast against each
    other, so one element can describe a whole field of algebra values.
    Grades below ``floor`` are dropped by every operation.
    """

    __slots__ = ("kappa", "coeffs", "floor")

    def __init__(self, coeffs=None, kappa: float = 1.0, floor: int = DEFAULT_FLOOR):
        if kappa not in (1, -1, 1.0, -1.0):
            raise ParameterError(f"kappa must be +1 or -1, got {kappa!r}")
        self.kappa = float(kappa)
        self.floor = int(floor)
        self.coeffs = {}
        for n, trip in (coeffs or {}).items():
            if int(n) < self.floor:
                continue
            if len(trip) != 3:
                raise AlgebraError("each grade needs (c_b, c_f1, c_f2)")
            self.coeffs[int(n)] = tuple(trip)

    # -- basic queries ---------------------------------------------------------
    @property
    def grades(self) -> list:
        return sorted(self.coeffs)

    @property
    def window(self) -> tuple:
        if not self.coeffs:
            return (0, 0)
        return (min(self.coeffs), max(self.coeffs))

    def get(self, n: int) -> tuple:
        return self.coeffs.get(n, (0j, 0j, 0j))

    def kernel(self, n: int):
        return self.get(n)[0]

    def image(self, n: int) -> tuple:
        return self.get(n)[1:]

    def _check(self, other: "LoopElement"):
        if not isinstance(other, LoopElement):
            raise AlgebraError("operand is not a LoopElement")
        if other.kappa != self.kappa:
            raise AlgebraError(f"kappa mismatch: {self.kappa} vs {other.kappa}")

    # -- linear structure -----------------------------------------------------
    def __add__(self, other: "LoopElement") -> "LoopElement":
        self._check(other)
        out = dict(self.coeffs)
        for n, (b, f1, f2) in other.coeffs.items():
            if n in out:
                ob, o1, o2 = out[n]
                out[n] = (ob + b, o1 + f1, o2 + f2)
            else:
                out[n] = (b, f1, f2)
        return LoopElement(out, self.kappa, min(self.floor, other.floor))

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, s) -> "LoopElement":
        return LoopElement({n: (b * s, f1 * s, f2 * s) for n, (b, f1, f2) in self.coeffs.items()},
                           self.kappa, self.floor)

    __rmul__ = __mul__

    def map(self, func) -> "LoopElement":
        """Apply ``func`` to every coefficient (e.g. differentiation)."""
        return LoopElement({n: tuple(func(c) for c in trip) for n, trip in self.coeffs.items()},
                           self.kappa, self.floor)

    def max_abs(self) -> float:
        m = 0.0
        for trip in self.coeffs.values():
            for c in trip:
                m = max(m, float(np.max(np.abs(c))))
        return m

    def to_matrix(self, lam: complex) -> np.ndarray:
        """2x2 matrix (leading axes) at spectral value ``lam``."""
        k = self.kappa
        sp = sm = s3 = 0j
        for n, (b, f1, f2) in self.coeffs.items():
            w = complex(lam) ** n
            s3 = s3 + w * b
            sp = sp + w * k * (f1 + f2) / SQRT2
            sm = sm + w * (f2 - f1) / SQRT2
        s3, sp, sm = np.broadcast_arrays(np.asarray(s3, complex), np.asarray(sp, complex),
                                         np.asarray(sm, complex))
        return np.array([[s3, sp], [sm, -s3]])

    def __repr__(self):
        return f"LoopElement(kappa={self.kappa:g}, grades={self.grades}, floor={self.floor})"


def basis(kind: str, n: int, kappa: float = 1.0, floor: int = DEFAULT_FLOOR) -> LoopElement:
    """Single basis element ``b``, ``F1`` or ``F2`` of grade ``n``."""
    slot = {"b": 0, "F1": 1, "F2": 2}[kind]
    trip = [0j, 0j, 0j]
    trip[slot] = 1.0 + 0j
    return LoopElement({n: tuple(trip)}, kappa, floor)


def commutator(e1: LoopElement, e2: LoopElement) -> LoopElement:
    """Lie bracket, truncated below the smaller of the two floors."""
    e1._check(e2)
    k = e1.kappa
    floor = min(e1.floor, e2.floor)
    out = {}
    for m, (b1, f1, f2) in e1.coeffs.items():
        for n, (b2, g1, g2) in e2.coeffs.items():
            grade = m + n
            if grade < floor:
                continue
            cb = k * (f1 * g2 - f2 * g1)
            c1 = 2.0 * (b1 * g2 - b2 * f2)
            c2 = 2.0 * (b1 * g1 - b2 * f1)
            if grade in out:
                ob, o1, o2 = out[grade]
                out[grade] = (ob + cb, o1 + c1, o2 + c2)
            else:
                out[grade] = (cb, c1, c2)
    return LoopElement(out, k, floor)


def _check_exponent(exponent: LoopElement):
    for n, trip in exponent.coeffs.items():
        if n >= 0 and any(np.any(np.asarray(c) != 0) for c in trip):
            raise AlgebraError(f"exponent must have strictly negative grades, found grade {n}")


def _depth_for(x: LoopElement, exponent: LoopElement) -> int:
    """Nested brackets needed before everything falls below the floor."""
    if not exponent.coeffs or not x.coeffs:
        return 0
    top = max(x.coeffs)
    step = -max(exponent.coeffs)
    return max(0, (top - x.floor) // step + 1)


def bch_conjugate(x: LoopElement, exponent: LoopElement, depth: int | None = None) -> LoopElement:
    """``exp(ad_J) x = x + sum_k ad_J^k(x) / k!`` truncated to the window.

    With a strictly grade-lowering exponent the series terminates inside the
    window, so the default depth gives the exact truncated result.
    """
    _check_exponent(exponent)
    if depth is None:
        depth = _depth_for(x, exponent)
    elif depth < 1:
        raise ParameterError("depth must be >= 1")
    out, term = x, x
    for k in range(1, depth + 1):
        term = commutator(exponent, term) * (1.0 / k)
        if not term.coeffs:
            break
        out = out + term
    return out


def gauge_derivative_term(exponent: LoopElement, d_exponent: LoopElement,
                          depth: int | None = None) -> LoopElement:
    """``g_s g^{-1} = sum_k ad_J^k(J_s) / (k+1)!`` for ``g = exp(J)``."""
    _check_exponent(exponent)
    if depth is None:
        depth = _depth_for(d_exponent, exponent)
    out, term = d_exponent, d_exponent
    for k in range(1, depth + 1):
        term = commutator(exponent, term) * (1.0 / (k + 1))
        if not term.coeffs:
            break
        out = out + term
    return out


# -----------------------------------------------------------------------------
# A+- fields and their jets
# -----------------------------------------------------------------------------

class ApmFields:
    """``A+- = A/kappa +- A*`` with cached finite-difference derivatives.

    Works on raw arrays so it can be built for a block of t-columns; t
    derivatives are only available when the block spans the full t range.
    """

    def __init__(self, A: np.ndarray, hx: float, ht: float | None = None, kappa: float = 1.0,
                 grid: Grid | None = None):
        if kappa not in (1, -1, 1.0, -1.0):
            raise ParameterError(f"kappa must be +1 or -1, got {kappa!r}")
        A = np.asarray(A, dtype=complex)
        self.kappa = float(kappa)
        self.hx, self.ht, self.grid = hx, ht, grid
        self._base = {"+": A / self.kappa + np.conj(A), "-": A / self.kappa - np.conj(A)}
        self._cache = {}

    @classmethod
    def from_solution(cls, s: AbSolution, kappa: float = 1.0) -> "ApmFields":
        g = s.grid
        return cls(s.A.values, g.hx, g.ht, kappa, g)

    @classmethod
    def from_field(cls, A: ComplexField, kappa: float = 1.0) -> "ApmFields":
        g = A.grid
        return cls(A.values, g.hx, g.ht, kappa, g)

    @property
    def a_plus(self) -> ComplexField:
        return ComplexField(self.grid, self._base["+"])

    @property
    def a_minus(self) -> ComplexField:
        return ComplexField(self.grid, self._base["-"])

    def d(self, which: str, nx: int = 0, nt: int = 0) -> np.ndarray:
        """``d^nx/dx^nx d^nt/dt^nt A_which`` with ``which`` in ``{'+', '-'}``."""
        key = (which, nx, nt)
        if key in self._cache:
            return self._cache[key]
        if nx == 0 and nt == 0:
            return self._base[which]
        if nx == 0:
            if self.ht is None:
                raise ParameterError("t derivatives need the full t range")
            val = derivative_along(self.d(which, 0, nt - 1), self.ht, 1)
        elif nx >= 2:
            val = second_derivative_along(self.d(which, nx - 2, nt), self.hx, 0)
        else:
            val = derivative_along(self.d(which, 0, nt), self.hx, 0)
        self._cache[key] = val
        return val

    def plus(self, nx=0, nt=0):
        return self.d("+", nx, nt)

    def minus(self, nx=0, nt=0):
        return self.d("-", nx, nt)

    @property
    def D(self) -> np.ndarray:
        """``A+^2 - A-^2`` (equal to ``4 |A|^2 / kappa``)."""
        return self.plus() ** 2 - self.minus() ** 2

    def W(self, nt_plus=0, nt_minus=0) -> np.ndarray:
        """``A+,x A- - A-,x A+`` (first-derivative Wronskian-like combination)."""
        return self.plus(1) * self.minus() - self.minus(1) * self.plus()


# -----------------------------------------------------------------------------
# Closed-form coefficients
# -----------------------------------------------------------------------------

@dataclass
class GaugeCoeffs:
    a1: dict
    a2: dict

    def exponent(self, kappa: float = 1.0, floor: int = DEFAULT_FLOOR, grades=(1, 2, 3, 4)) -> LoopElement:
        return LoopElement({-n: (0j, self.a1[n], self.a2[n]) for n in grades}, kappa, floor)


def gauge_coeffs(ap: ApmFields) -> GaugeCoeffs:
    """Gauge coefficients ``a1^{-n}``, ``a2^{-n}`` for n = 1..4."""
    k = ap.kappa
    P, Mn = ap.plus, ap.minus
    D = ap.D
    s = SQRT2
    a1 = {1: 1j / (4 * s) * Mn(), 2: -P(1) / (8 * s),
          3: -1j / (16 * s) * Mn(2) - 1j * k / (192 * s) * D * Mn(),
          4: (k / (96 * s) * P() ** 2 * P(1) - k / (128 * s) * Mn() ** 2 * P(1)
              - k / (384 * s) * Mn(1) * P() * Mn() + P(3) / (32 * s))}
    a2 = {1: 1j / (4 * s) * P(), 2: -Mn(1) / (8 * s),
          3: -1j / (16 * s) * P(2) - 1j * k / (192 * s) * D * P(),
          4: (-k / (96 * s) * Mn() ** 2 * Mn(1) + k / (128 * s) * P() ** 2 * Mn(1)
              + k / (384 * s) * P(1) * P() * Mn() + Mn(3) / (32 * s))}
    return GaugeCoeffs(a1, a2)


def kernel_coeffs_L(ap: ApmFields) -> dict:
    """Kernel coefficients ``beta_L^n`` of the rotated spatial component, n = 1..-4."""
    k = ap.kappa
    P, Mn = ap.plus, ap.minus
    D, W = ap.D, ap.W()
    shape = P().shape
    return {
        1: np.full(shape, -1j),
        0: np.zeros(shape, dtype=complex),
        -1: -1j * k / 32 * D,
        -2: -k / 64 * W,
        -3: 1j * k * k / 2048 * D ** 2 + 1j * k / 128 * (P() * P(2) - Mn() * Mn(2)),
        -4: k / 256 * (P(3) * Mn() - Mn(3) * P()) + 9 * k * k / 12288 * D * W,
    }


def kernel_coeffs_M(ap: ApmFields, B) -> tuple:
    """``(beta_M, alpha1, alpha2)`` of the rotated temporal component, grades -1..-4."""
    B = B.values if isinstance(B, ComplexField) else np.asarray(B)
    k = ap.kappa
    P, Mn = ap.plus, ap.minus
    D = ap.D
    s = SQRT2
    Wt = P(0, 1) * Mn() - Mn(0, 1) * P()  # A+,t A- - A-,t A+
    Wx = ap.W()
    # (A+,xx A- - A-,xx A+)_t expanded
    Wxx_t = P(2, 1) * Mn() + P(2) * Mn(0, 1) - Mn(2, 1) * P() - Mn(2) * P(0, 1)
    # (A+,x A+ - A-,x A-)_t expanded
    Sx_t = P(1, 1) * P() + P(1) * P(0, 1) - Mn(1, 1) * Mn() - Mn(1) * Mn(0, 1)
    D_t = 2.0 * (P() * P(0, 1) - Mn() * Mn(0, 1))
    beta = {
        -1: 1j * B / 4 + 0j * P(),
        -2: k / 64 * Wt,
        -3: 1j * k / 128 * Sx_t - 1j * k * B / 128 * D,
        -4: (k / 256 * Wxx_t + k / 256 * (P(1) * Mn(1, 1) - Mn(1) * P(1, 1))
             - k * B / 128 * Wx + 5 * k * k / 12288 * D * Wt),
    }

    def alpha(sign):
        X, Y = (P, Mn) if sign > 0 else (Mn, P)  # X = A_pm, Y = A_mp
        return {
            -1: np.zeros_like(P()),
            -2: -1 / (8 * s) * (X(1, 1) - B * X()),
            -3: (-1j / (16 * s) * Y(2, 1) + 1j * B / (16 * s) * Y(1)
                 - 1j * k / (192 * s) * Wt * X()
                 - 1j * k / (192 * s) * (D_t * Y() + D * Y(0, 1))),
            -4: (-B / (32 * s) * X(2) - k * B / (256 * s) * D * X() + X(3, 1) / (32 * s)
                 + sign * k / (256 * s) * (3 * X(1, 1) * X() ** 2 - 2 * X(1, 1) * Y() ** 2
                                           + 6 * X(1) * X(0, 1) * X() - 2 * Y(1) * Y(0, 1) * X()
                                           - Y(1, 1) * P() * Mn() - 4 * X(1) * Y(0, 1) * Y())),
        }

    return beta, alpha(+1), alpha(-1)


def curvature_coeffs(ap: ApmFields) -> tuple:
    """``(f0, f1, f2)`` of the rotated curvature ``X g b^{-1} g^{-1}``, grades -1..-4."""
    k = ap.kappa
    P, Mn = ap.plus, ap.minus
    D = ap.D
    s = SQRT2
    shape = P().shape
    f0 = {-1: np.ones(shape, dtype=complex), -2: np.zeros(shape, dtype=complex),
          -3: -k / 32 * D, -4: 1j * k / 32 * ap.W()}
    zero = np.zeros(shape, dtype=complex)
    f1 = {-1: zero, -2: -1j / (2 * s) * P(), -3: Mn(1) / (4 * s),
          -4: 1j / (8 * s) * P(2) + 1j * k / (64 * s) * D * P()}
    f2 = {-1: zero, -2: -1j / (2 * s) * Mn(), -3: P(1) / (4 * s),
          -4: 1j / (8 * s) * Mn(2) + 1j * k / (64 * s) * D * Mn()}
    return f0, f1, f2


def f0_coeff(ap: ApmFields, n: int) -> np.ndarray:
    """Single ``f0^{-n}`` without building the whole family."""
    return curvature_coeffs(ap)[0][-n]


# -----------------------------------------------------------------------------
# Lax components as loop elements and the gauge rotation
# -----------------------------------------------------------------------------

def spatial_lax(ap: ApmFields, floor: int = DEFAULT_FLOOR) -> LoopElement:
    return LoopElement({1: (-1j, 0j, 0j),
                        0: (0j, ap.plus() / (2 * SQRT2), ap.minus() / (2 * SQRT2))},
                       ap.kappa, floor)


def temporal_lax(ap: ApmFields, B, floor: int = DEFAULT_FLOOR) -> LoopElement:
    B = B.values if isinstance(B, ComplexField) else np.asarray(B)
    return LoopElement({-1: (1j * B / 4, -1j / (4 * SQRT2) * ap.minus(0, 1),
                             -1j / (4 * SQRT2) * ap.plus(0, 1))}, ap.kappa, floor)


def rotate(x: LoopElement, exponent: LoopElement, d_exponent: LoopElement) -> LoopElement:
    """``g x g^{-1} + g_s g^{-1}`` for ``g = exp(exponent)``."""
    return bch_conjugate(x, exponent) + gauge_derivative_term(exponent, d_exponent)


def _d_exponent(J: LoopElement, h: float, axis: int) -> LoopElement:
    return J.map(lambda c: derivative_along(c, h, axis) if isinstance(c, np.ndarray) and c.ndim == 2
                 else 0j * c)


@dataclass
class AbelianizationReport:
    image_norms: dict
    kernel_deviation: dict
    truncation_grade: int
    band: int
    kappa: float
    extra: dict = field(default_factory=dict)

    def asserted_max(self) -> tuple:
        img = max(self.image_norms[n] for n in (0, -1, -2, -3))
        ker = max(self.kernel_deviation[n] for n in (1, 0, -1, -2, -3))
        return img, ker

    def to_dict(self) -> dict:
        return {"image_norms": {str(k): v for k, v in self.image_norms.items()},
                "kernel_deviation": {str(k): v for k, v in self.kernel_deviation.items()},
                "asserted_grades": [0, -1, -2, -3],
                "reported_only_grade": self.truncation_grade,
                "band": self.band, "kappa": self.kappa, **self.extra}


def _column_blocks(nt: int, block: int):
    for j0 in range(0, nt, block):
        yield slice(j0, min(nt, j0 + block))


def verify_abelianization(s: AbSolution, kappa: float = 1.0, band: int = 2,
                          block: int = 64) -> AbelianizationReport:
    """Rotate L by the closed-form gauge and measure what is left in the Image.

    Only x-derivatives enter, so the grid is processed in blocks of
    t-columns.  J_x is the finite-difference x-derivative of the gauge
    coefficient fields.
    """
    g = s.grid
    grades = (1, 0, -1, -2, -3, -4)
    img = {n: 0.0 for n in grades}
    ker = {n: 0.0 for n in grades}
    xs = slice(band, g.nx - band)
    for cols in _column_blocks(g.nt, block):
        ap = ApmFields(s.A.values[:, cols], g.hx, None, kappa)
        J = gauge_coeffs(ap).exponent(kappa)
        Lbar = rotate(spatial_lax(ap), J, _d_exponent(J, g.hx, 0))
        beta = kernel_coeffs_L(ap)
        for n in grades:
            cb, c1, c2 = (np.broadcast_to(np.asarray(c), ap.plus().shape) for c in Lbar.get(n))
            img[n] = max(img[n], float(np.max(np.abs(c1[xs]))), float(np.max(np.abs(c2[xs]))))
            ker[n] = max(ker[n], float(np.max(np.abs((cb - beta[n])[xs]))))
    return AbelianizationReport(img, ker, DEFAULT_FLOOR, band, float(kappa))


# -----------------------------------------------------------------------------
# Charges
# -----------------------------------------------------------------------------

@dataclass
class ChargeSeries:
    n: int
    t: np.ndarray
    q_of_t: np.ndarray
    flux_of_t: np.ndarray

    def drift(self, t_window=(-2.0, 2.0)) -> float:
        """``max |Q(t) - Q(0)| / (1 + |Q(0)|)`` over the window."""
        sel = (self.t >= t_window[0] - 1e-12) & (self.t <= t_window[1] + 1e-12)
        j0 = int(np.argmin(np.abs(self.t)))
        q0 = self.q_of_t[j0]
        return float(np.max(np.abs(self.q_of_t[sel] - q0)) / (1.0 + abs(q0)))


def _check_ns(ns):
    ns = [int(n) for n in ns]
    for n in ns:
        if n not in SUPPORTED_CHARGES:
            raise ParameterError(f"charge index {n} not supported; choose from {SUPPORTED_CHARGES}")
    return ns


def anomaly_values(s: AbSolution) -> np.ndarray:
    g = s.grid
    a2 = np.abs(s.A.values) ** 2
    return -0.125j * (2.0 * derivative_along(s.B.values, g.hx, 0) + derivative_along(a2, g.ht, 1))


def _densities(s: AbSolution, ns, kappa, anomaly, block):
    """x-integrals of beta_L^{-n} and X f0^{-n} for each t-column."""
    g = s.grid
    q = {n: np.zeros(g.nt, dtype=complex) for n in ns}
    fl = {n: np.zeros(g.nt, dtype=complex) for n in ns}
    for cols in _column_blocks(g.nt, block):
        ap = ApmFields(s.A.values[:, cols], g.hx, None, kappa)
        beta = kernel_coeffs_L(ap)
        f0 = curvature_coeffs(ap)[0]
        X = anomaly[:, cols]
        for n in ns:
            q[n][cols] = simpson(beta[-n], g.hx, axis=0)
            fl[n][cols] = simpson(X * f0[-n], g.hx, axis=0)
    return q, fl


def charges(s: AbSolution, ns=(1, 2, 3, 4), kappa: float = 1.0, block: int = 64) -> list:
    """``Q^{-n}(t) = int beta_L^{-n} dx`` and ``flux(t) = int X f0^{-n} dx``."""
    ns = _check_ns(ns)
    q, fl = _densities(s, ns, kappa, anomaly_values(s), block)
    return [ChargeSeries(n, s.grid.t, q[n], fl[n]) for n in ns]


@dataclass
class BalanceReport:
    n: int
    mismatch: float
    dq_max: float
    flux_max: float
    explicit_mismatch: float | None = None
    boundary_max: float | None = None
    closed_mismatch: float | None = None

    def to_dict(self):
        return {"n": self.n, "mismatch": self.mismatch, "dq_dt_max": self.dq_max,
                "flux_max": self.flux_max, "explicit_flux_mismatch": self.explicit_mismatch,
                "boundary_flux_max": self.boundary_max,
                "mismatch_with_boundary_flux": self.closed_mismatch}


def _explicit_flux(s: AbSolution, n: int, X: np.ndarray) -> np.ndarray:
    g = s.grid
    A = s.A.values
    if n == 3:
        dens = -0.125 * X * np.abs(A) ** 2
    else:
        Ax = derivative_along(A, g.hx, 0)
        dens = -1j / 16 * X * (Ax * np.conj(A) - np.conj(Ax) * A)
    return simpson(dens, g.hx, axis=0)


BALANCE_FLOOR = 1e-8


EDGE_ROWS = 16


def boundary_flux(s: AbSolution, ns, kappa: float = 1.0) -> dict:
    """``beta_M^{-n}(X, t) - beta_M^{-n}(-X, t)`` for each t.

    Only strips of ``EDGE_ROWS`` x-nodes at each edge are processed; the
    stencils reaching row 0 (or the last row) are the same as on the full grid.
    """
    g = s.grid
    k = min(EDGE_ROWS, g.nx)
    out = {}
    for rows, pick in ((slice(0, k), 0), (slice(g.nx - k, g.nx), -1)):
        ap = ApmFields(s.A.values[rows], g.hx, g.ht, kappa)
        beta = kernel_coeffs_M(ap, s.B.values[rows])[0]
        for n in ns:
            edge = np.asarray(beta[-n])[pick]
            out[n] = out.get(n, 0) + (edge if pick == -1 else -edge)
    return out


def charge_balance(s: AbSolution, ns=(1, 3, 4), kappa: float = 1.0, t_band: int = 2,
                   series: list | None = None) -> list:
    """Compare ``dQ^{-n}/dt`` with ``int X f0^{-n} dx`` over the interior t range.

    ``mismatch`` is ``max_t |dQ/dt - flux|`` divided by the larger of the two
    sides' max magnitudes.  When both sides sit below ``BALANCE_FLOOR`` there is
    nothing to balance and the absolute difference is reported instead.

    The boundary flux ``[beta_M^{-n}]`` at the x edges is reported alongside,
    with the mismatch that remains once it is added to the anomaly flux.
    """
    ns = _check_ns(ns)
    g = s.grid
    series = series or charges(s, ns, kappa)
    by_n = {c.n: c for c in series}
    X = anomaly_values(s)
    edges = boundary_flux(s, ns, kappa)
    out = []
    sl = slice(t_band, g.nt - t_band)

    def rel(diff, a, b):
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
        d = float(np.max(np.abs(diff)))
        return float(d / scale) if scale > BALANCE_FLOOR else d

    for n in ns:
        c = by_n[n]
        dq = derivative_along(c.q_of_t, g.ht, 0)[sl]
        fl = c.flux_of_t[sl]
        bnd = np.asarray(edges[n])[sl]
        explicit = None
        if n in (3, 4):
            ex = _explicit_flux(s, n, X)
            explicit = rel(ex - c.flux_of_t, ex, c.flux_of_t)
        out.append(BalanceReport(n, rel(dq - fl, dq, fl), float(np.max(np.abs(dq))),
                                 float(np.max(np.abs(fl))), explicit,
                                 float(np.max(np.abs(bnd))), rel(dq - fl - bnd, dq, fl + bnd)))
    return out


class Protection(enum.Enum):
    TRIVIAL = "TriviallyConserved"
    PROTECTED = "ParityProtected"
    NOT_PROTECTED = "NotProtected"


@dataclass
class AsymptoticReport:
    n: int
    S: complex
    R: float
    ratio: float
    status: Protection

    def to_dict(self):
        return {"n": self.n, "S_re": self.S.real, "S_im": self.S.imag, "R": self.R,
                "ratio": self.ratio, "status": self.status.value}


ASYMPTOTIC_THRESHOLD = 1e-3


def asymptotic_conservation(s: AbSolution, n: int, kappa: float = 1.0,
                            anomaly: np.ndarray | None = None,
                            threshold: float = ASYMPTOTIC_THRESHOLD,
                            anomaly_floor: float = ANOMALY_FLOOR, block: int = 64) -> AsymptoticReport:
    """``S = intint X f0^{-n}`` against ``R = intint |X f0^{-n}|`` on the full rectangle.

    The case counts as trivially conserved when R < 1e-14 or when the anomaly
    itself is at discretization-noise level (max |X| <= ``anomaly_floor``).
    """
    (n,) = _check_ns([n])
    g = s.grid
    X = anomaly_values(s) if anomaly is None else np.asarray(anomaly)
    s_t = np.zeros(g.nt, dtype=complex)
    r_t = np.zeros(g.nt)
    for cols in _column_blocks(g.nt, block):
        ap = ApmFields(s.A.values[:, cols], g.hx, None, kappa)
        dens = X[:, cols] * curvature_coeffs(ap)[0][-n]
        s_t[cols] = simpson(dens, g.hx, axis=0)
        r_t[cols] = simpson(np.abs(dens), g.hx, axis=0)
    S = complex(simpson(s_t, g.ht, axis=0))
    R = float(simpson(r_t, g.ht, axis=0))
    if R < 1e-14 or float(np.max(np.abs(X))) <= anomaly_floor:
        return AsymptoticReport(n, S, R, 0.0 if R < 1e-14 else abs(S) / R, Protection.TRIVIAL)
    ratio = abs(S) / R
    status = Protection.PROTECTED if ratio <= threshold else Protection.NOT_PROTECTED
    return AsymptoticReport(n, S, R, ratio, status)
