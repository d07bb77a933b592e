"""Lax pair of the AB system, its zero-curvature residual, and the anomaly field.

    L = -i lam s3 + (A/2) s+ - (A*/2) s-
    M = (1 / 4 i lam) (-B s3 + A_t s+ + A_t* s-)

The curvature L_t - M_x + [L, M] has a s3 channel equal to X/lam, with the
anomaly X = -(i/8)[2 B_x + (|A|^2)_t], and s+/s- channels proportional to
A_xt - A B and its conjugate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .numerics import ComplexField, derivative_along
from .solutions import AbSolution

DEFAULT_LAMBDAS = (1.0 + 0j, 1j, 0.5 + 0.5j, 2.0 + 0j)


@dataclass
class LaxSample:
    """L and M as ``(2, 2, nx, nt)`` complex arrays at one spectral value."""

    lam: complex
    L: np.ndarray
    M: np.ndarray

    def trace_max(self) -> float:
        return float(max(np.abs(self.L[0, 0] + self.L[1, 1]).max(),
                         np.abs(self.M[0, 0] + self.M[1, 1]).max()))


@dataclass(frozen=True)
class CurvatureChannels:
    """Curvature written as ``c3 s3 + cp s+ + cm s-``."""

    lam: complex
    c3: ComplexField
    cp: ComplexField
    cm: ComplexField

    def norms(self, band: int = 2) -> dict:
        return {"sigma3": self.c3.max_abs(band), "sigma_plus": self.cp.max_abs(band),
                "sigma_minus": self.cm.max_abs(band)}


def _check_lambda(lam) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise ParameterError("spectral parameter must be nonzero (M has a pole at 0)")
    return lam


def _components(s: AbSolution, lam: complex):
    """(l3, lp, lm), (m3, mp, mm) as arrays; l3 is a scalar."""
    g = s.grid
    A = s.A.values
    A_t = derivative_along(A, g.ht, 1)
    k = 1.0 / (4j * lam)
    return (-1j * lam, 0.5 * A, -0.5 * np.conj(A)), (-k * s.B.values, k * A_t, k * np.conj(A_t))


def lax_pair(s: AbSolution, lam) -> LaxSample:
    lam = _check_lambda(lam)
    (l3, lp, lm), (m3, mp, mm) = _components(s, lam)
    shape = s.grid.shape

    def assemble(c3, cp, cm):
        out = np.zeros((2, 2) + shape, dtype=complex)
        out[0, 0] = c3
        out[1, 1] = -np.asarray(c3)
        out[0, 1] = cp
        out[1, 0] = cm
        return out

    return LaxSample(lam, assemble(l3, lp, lm), assemble(m3, mp, mm))


def curvature_matrix(sample: LaxSample, grid) -> np.ndarray:
    """Entrywise ``L_t - M_x + [L, M]`` with finite-difference derivatives."""
    L, M = sample.L, sample.M
    out = np.empty_like(L)
    for i in range(2):
        for j in range(2):
            comm = sum(L[i, k] * M[k, j] - M[i, k] * L[k, j] for k in range(2))
            out[i, j] = (derivative_along(L[i, j], grid.ht, 1)
                         - derivative_along(M[i, j], grid.hx, 0) + comm)
    return out


def curvature_channels(s: AbSolution, lam) -> CurvatureChannels:
    """Curvature projected on the s3, s+, s- basis (component form, no 2x2 storage)."""
    lam = _check_lambda(lam)
    g = s.grid
    (l3, lp, lm), (m3, mp, mm) = _components(s, lam)
    d_t = lambda f: derivative_along(f, g.ht, 1)
    d_x = lambda f: derivative_along(f, g.hx, 0)
    c3 = -d_x(m3) + (lp * mm - lm * mp)
    cp = d_t(lp) - d_x(mp) + 2.0 * (l3 * mp - lp * m3)
    cm = d_t(lm) - d_x(mm) + 2.0 * (lm * m3 - l3 * mm)
    return CurvatureChannels(lam, ComplexField(g, c3), ComplexField(g, cp), ComplexField(g, cm))


def curvature_residual(s: AbSolution, lam, band: int = 2) -> float:
    """Interior max-norm over the entries of ``L_t - M_x + [L, M]``."""
    n = curvature_channels(s, lam).norms(band)
    return max(n.values())


def anomaly(s: AbSolution) -> ComplexField:
    """``X = -(i/8) [2 B_x + (|A|^2)_t]`` by finite differences."""
    g = s.grid
    a2 = np.abs(s.A.values) ** 2
    bracket = 2.0 * derivative_along(s.B.values, g.hx, 0) + derivative_along(a2, g.ht, 1)
    return ComplexField(g, -0.125j * bracket)


def sigma3_anomaly(ch: CurvatureChannels) -> ComplexField:
    """Anomaly recovered from the s3 channel: ``X = lam * c3``."""
    return ch.c3 * ch.lam
