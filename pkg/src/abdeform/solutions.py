"""Exact solutions of the AB system, ansatz fields, and residual checks.

The AB system is

    2 B_x + (|A|^2)_t = 0,        A_xt = A B,

with the normalization |A_t|^2 + B^2 = 1 for the localized solutions used
here.  Real-A solutions come from the sine-Gordon equation psi_xt = sin psi
through A = psi_x, B = cos psi.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .numerics import ComplexField, Grid, differentiate, dx, dxx, dt

# (x, t) arrays -> (A, B) arrays; used where a field must be sampled off-grid.
Evaluator = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass
class AbSolution:
    name: str
    A: ComplexField
    B: ComplexField
    params: dict = field(default_factory=dict)
    phase_phi: Optional[ComplexField] = None
    exact: bool = True
    evaluator: Optional[Evaluator] = None
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.A.grid

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "exact": self.exact, **self.meta}


@dataclass(frozen=True)
class ResidualReport:
    r1_norm: float
    r2_norm: float
    r5_norm: float
    norm_residual: float

    def to_dict(self) -> dict:
        return {"r1": self.r1_norm, "r2": self.r2_norm, "r5": self.r5_norm,
                "normalization": self.norm_residual}


def _theta(a: float, delta: float):
    return lambda x, t: a * x + t / a + delta


# -----------------------------------------------------------------------------
# Catalog
# -----------------------------------------------------------------------------

def one_soliton_arrays(g_hat: float, delta: float, x, t):
    th = g_hat * x + t / g_hat + delta
    sech = 1.0 / np.cosh(th)
    return 2.0 * g_hat * sech + 0j, (1.0 - 2.0 * sech ** 2) + 0j


def one_soliton(g_hat: float, delta: float = 0.0, grid: Grid | None = None) -> AbSolution:
    """Single soliton ``A = 2 g sech(theta)``, ``B = 1 - 2 sech^2(theta)``.

    ``theta = g x + t/g + delta``; ``g`` is the real amplitude parameter.
    """
    if g_hat == 0 or not np.isfinite(g_hat):
        raise ParameterError("g_hat must be a finite nonzero real")
    grid = grid or Grid.default()
    X, T = grid.mesh()
    A, B = one_soliton_arrays(g_hat, delta, X, T)
    return AbSolution("one_soliton", ComplexField(grid, A), ComplexField(grid, B),
                      {"g_hat": float(g_hat), "delta": float(delta)},
                      evaluator=lambda x, t: one_soliton_arrays(g_hat, delta, x, t))


def one_soliton_at(g_hat: float, delta: float, x, t) -> dict:
    """Pointwise analytic A, B and A_t of the single soliton."""
    th = g_hat * np.asarray(x) + np.asarray(t) / g_hat + delta
    sech = 1.0 / np.cosh(th)
    return {"A": 2.0 * g_hat * sech, "B": 1.0 - 2.0 * sech ** 2,
            "A_t": -2.0 * sech * np.tanh(th)}


def _two_soliton_psi(a1, a2, d1, d2, x, t):
    """Kink-antikink angle psi and its x-derivative, analytic."""
    th1 = a1 * x + t / a1 + d1
    th2 = a2 * x + t / a2 + d2
    eta, zeta = 0.5 * (th1 - th2), 0.5 * (th1 + th2)
    c = (a1 + a2) / (a1 - a2)
    u = c * np.sinh(eta) / np.cosh(zeta)
    u_x = c * (0.5 * (a1 - a2) * np.cosh(eta) * np.cosh(zeta)
               - 0.5 * (a1 + a2) * np.sinh(eta) * np.sinh(zeta)) / np.cosh(zeta) ** 2
    return 4.0 * np.arctan(u), 4.0 * u_x / (1.0 + u * u)


def two_soliton_det(a1, a2, d1, d2, x, t):
    """det M with M_ij = cosh((theta_i + theta_j)/2) / (a_i + a_j)."""
    th1 = a1 * x + t / a1 + d1
    th2 = a2 * x + t / a2 + d2
    return (np.cosh(th1) * np.cosh(th2) / (4.0 * a1 * a2)
            - np.cosh(0.5 * (th1 + th2)) ** 2 / (a1 + a2) ** 2)


def two_soliton_printed_forms(a1, a2, d1, d2, x, t):
    """The printed closed forms for (A0^2, B0), evaluated literally.

    Kept only as a documented comparison target; they do not solve the AB
    system (see the test suite) and are not used to build solutions.
    """
    th1 = a1 * x + t / a1 + d1
    th2 = a2 * x + t / a2 + d2
    r = ((a1 - a2) / (a1 + a2)) ** 2
    den = (np.cosh(th1) * np.cosh(th2)
           - 4.0 * a1 * a2 / (a1 + a2) ** 2 * np.cosh(0.5 * (th1 + th2)) ** 2) ** -2
    a_sq = -4.0 * r * den * (np.sinh(th1 - th2) * (a1 ** 2 * np.sinh(th1) * np.cosh(th2)
                                                   - a2 ** 2 * np.cosh(th1) * np.sinh(th2))
                             - 2.0 * a1 * a2 * (1.0 + np.sinh(th1) ** 2 * np.sinh(th2) ** 2))
    b = -1.0 - 2.0 * r * den * (
        2.0 * np.sinh(th1) * np.sinh(th2) * (1.0 + np.cosh(th1 + th2))
        - 0.5 * (a1 + a2) / (a1 - a2) * (1.0 + np.cosh(2 * th1) * np.cosh(2 * th2))
        + a2 ** 2 / (2.0 * a1 * (a1 - a2)) * np.sinh(2 * th1) * np.sinh(2 * th2))
    return a_sq, b


def two_soliton(a1: float, a2: float, d1: float = 0.0, d2: float = 0.0,
                grid: Grid | None = None) -> AbSolution:
    """Two-soliton (kink-antikink) solution of the AB system.

    A0^2 = 4 (ln det M)_xx and B0 = 1 - 2 (ln det M)_xt, realized through the
    sine-Gordon angle psi = 4 arctan[(a1+a2)/(a1-a2) sinh(eta)/cosh(zeta)]
    with A0 = psi_x, B0 = cos psi.  A0 is real and crosses zero; its global
    sign is chosen so that A0 > 0 next to the left edge at t = 0.
    """
    if a1 * a2 == 0 or abs(a1) == abs(a2):
        raise ParameterError("two_soliton needs a1*a2 != 0 and a1 != +-a2")
    grid = grid or Grid.default()
    _, psi_x_edge = _two_soliton_psi(a1, a2, d1, d2, np.array(-grid.x_half_width), np.array(0.0))
    sign = -1.0 if psi_x_edge < 0 else 1.0

    def evaluate(x, t):
        psi, psi_x = _two_soliton_psi(a1, a2, d1, d2, x, t)
        return sign * psi_x + 0j, np.cos(psi) + 0j

    X, T = grid.mesh()
    A, B = evaluate(X, T)
    psi, _ = _two_soliton_psi(a1, a2, d1, d2, X, T)
    return AbSolution("two_soliton", ComplexField(grid, A), ComplexField(grid, B),
                      {"a1": float(a1), "a2": float(a2), "d1": float(d1), "d2": float(d2)},
                      evaluator=evaluate,
                      meta={"a0_kind": "real", "sign": sign,
                            "psi": ComplexField(grid, sign * psi)})


def kink_ansatz(a: float, delta: float = 0.0, grid: Grid | None = None) -> ComplexField:
    """``A_d = 4 arctan(exp(a x + t/a + delta))``; not an AB solution."""
    if a == 0 or not np.isfinite(a):
        raise ParameterError("kink parameter a must be a finite nonzero real")
    grid = grid or Grid.default()
    return ComplexField.from_function(grid, lambda x, t: 4.0 * np.arctan(np.exp(a * x + t / a + delta)))


class KinkBranch(enum.Enum):
    KK = "kk"
    KAK = "kak"


def kk_kak_values(a: float, branch: KinkBranch, x, t):
    """Literal kink-kink (upper signs) / kink-antikink (lower signs) ansatz."""
    s = 1.0 if branch is KinkBranch.KK else -1.0
    p, m = 1.0 + s * a * a, 1.0 - s * a * a  # (1 +- a^2), (1 -+ a^2)
    u = p / (2.0 * a) * (x + s * t)
    v = m / (2.0 * a) * (x - s * t)
    sech_v = 1.0 / np.cosh(v)
    pre = 1.0 + (m / (1.0 + a * a)) ** 2 * np.sinh(u) ** 2 * sech_v ** 2
    body = m * np.cosh(u) - m ** 2 / p * np.sinh(u) * np.tanh(v)
    return 2.0 / a * sech_v * body / pre


def kk_kak_ansatz(a: float, branch="kk", grid: Grid | None = None) -> ComplexField:
    """Kink-kink / kink-antikink ansatz field.

    At ``|a| = 1`` the KK prefactor ``1 - a^2`` vanishes identically and the
    KAK branch divides by ``1 - a^2``; both raise.
    """
    branch = KinkBranch(branch.value if isinstance(branch, KinkBranch) else str(branch).lower())
    if a == 0 or not np.isfinite(a):
        raise ParameterError("kk/kak parameter a must be a finite nonzero real")
    if abs(abs(a) - 1.0) < 1e-12:
        raise ParameterError(f"{branch.value}: |a| = 1 degenerates the ansatz")
    grid = grid or Grid.default()
    X, T = grid.mesh()
    with np.errstate(over="ignore", invalid="ignore"):
        vals = kk_kak_values(a, branch, X, T)
    return ComplexField(grid, vals)


def sg_map(psi: ComplexField, phi: ComplexField | None = None, name: str = "sg_map") -> AbSolution:
    """``A = psi_x exp(i phi)``, ``B = cos psi`` from a real sine-Gordon angle."""
    p = psi.values.real
    A = differentiate(ComplexField(psi.grid, p), "x")
    if phi is not None:
        A = A * np.exp(1j * phi.values.real)
    return AbSolution(name, A, ComplexField(psi.grid, np.cos(p)), phase_phi=phi,
                      meta={"psi": psi})


def sg_kink(grid: Grid | None = None, a: float = 1.0, delta: float = 0.0) -> ComplexField:
    """Sine-Gordon kink angle ``4 arctan(exp(a x + t/a + delta))``."""
    grid = grid or Grid.default()
    return ComplexField.from_function(grid, lambda x, t: 4.0 * np.arctan(np.exp(a * x + t / a + delta)))


# -----------------------------------------------------------------------------
# Residuals
# -----------------------------------------------------------------------------

def _interior_max(values, grid: Grid, band: int = 2) -> float:
    v = values[grid.interior(band)]
    return float(np.max(np.abs(v))) if v.size else 0.0


def ab_residuals(s: AbSolution, band: int = 2) -> ResidualReport:
    """Max-norm residuals of the AB system on the grid interior.

    Rows within ``band`` nodes of any edge are excluded, where the one-sided
    stencils are least accurate.
    """
    g = s.grid
    A, B = s.A, s.B
    a2 = A.abs2()
    a2_t = dt(a2)
    r1 = 2.0 * dx(B) + a2_t
    A_x = dx(A)
    A_t = dt(A)
    A_xt = dx(A_t)
    r2 = A_xt - A * B
    A_xxt = dxx(A_t)
    r5 = A * A * a2_t + 2.0 * A * A_xxt - 2.0 * A_x * A_xt
    nr = A_t.abs2() + B * B - 1.0
    return ResidualReport(_interior_max(r1.values, g, band), _interior_max(r2.values, g, band),
                          _interior_max(r5.values, g, band), _interior_max(nr.values, g, band))


CATALOG = ("one_soliton", "two_soliton", "kink", "kk", "kak", "sg_kink")


def build(name: str, params: dict, grid: Grid):
    """Construct a catalog entry by name; ansatz entries return a bare field."""
    p = dict(params)

    def take(*keys, default):
        for k in keys:
            if k in p:
                return p.pop(k)
        return default

    if name == "one_soliton":
        out = one_soliton(take("g", "g_hat", default=1.5), take("d", "delta", default=0.0), grid)
    elif name == "two_soliton":
        out = two_soliton(take("a1", default=1.1), take("a2", default=1.0),
                          take("d1", default=0.0), take("d2", default=0.0), grid)
    elif name == "kink":
        out = kink_ansatz(take("a", default=1.5), take("d", "delta", default=0.0), grid)
    elif name in ("kk", "kak"):
        out = kk_kak_ansatz(take("a", default=2.0), name, grid)
    elif name == "sg_kink":
        out = sg_map(sg_kink(grid, take("a", default=1.0), take("d", "delta", default=0.0)),
                     name="sg_kink")
    else:
        raise ParameterError(f"unknown solution {name!r}; choose from {', '.join(CATALOG)}")
    if p:
        raise ParameterError(f"unknown parameters for {name}: {sorted(p)}")
    return out
