"""Quasi-integrable deformation of the AB system at first order in epsilon.

The potential B is deformed through the quasi-sine-Gordon map.  Writing
s = sqrt(1 + B0) and

    G(B0) = 1 - B0 + (sqrt2 - s)^2 ln((sqrt2 - s) / (2 sqrt2)),

the first-order pieces are

    B   = B0 + eps [G - (1/2) d_x^{-1}(A0 A1* + A0* A1)_t],
    (d_x d_t - B0) A1 = A0 (G + B0),
    X^1 = -(i/4) d_x G.

G has a removable 0 ln 0 at B0 = 1 and a kink wherever B0 = -1.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import loopalgebra as la
from .errors import DomainError, ParameterError, SolverError
from .laxcurv import anomaly
from .numerics import (ComplexField, Grid, antiderivative_x, cumulative_simpson,
                       derivative_along, l2_norm, parity_split)
from .solutions import AbSolution

SQRT2 = math.sqrt(2.0)
DOMAIN_SLACK = 1e-8
GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class QidConfig:
    epsilon: float = 0.1
    solver_substeps: int = 1
    log_floor: float = 1e-30
    boundary: str = "upwind"

    def __post_init__(self):
        if not (self.epsilon >= 0 and np.isfinite(self.epsilon)):
            raise ParameterError("epsilon must be a finite non-negative real")
        if self.log_floor <= 0:
            raise ParameterError("log_floor must be positive")
        if int(self.solver_substeps) < 1:
            raise ParameterError("solver_substeps must be >= 1")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"boundary must be one of {BOUNDARIES}")


# "left": V(-X, t) = 0 for both time directions.
# "upwind": V(+X, t) = 0 while marching to t > 0, V(-X, t) = 0 for t < 0.
BOUNDARIES = ("left", "upwind")


class PotentialMode(enum.Enum):
    EXACT = "exact"
    FIRST_ORDER = "first_order"


def _real_b(B0, slack=DOMAIN_SLACK) -> np.ndarray:
    b = np.real(B0.values if isinstance(B0, ComplexField) else np.asarray(B0))
    if np.any(b < -1.0 - slack) or np.any(b > 1.0 + slack):
        lo, hi = float(b.min()), float(b.max())
        raise DomainError(f"B0 outside [-1, 1] (range [{lo:.3g}, {hi:.3g}])")
    return np.clip(b, -1.0, 1.0)


def _xlogx_term(b: np.ndarray, log_floor: float) -> np.ndarray:
    """``(sqrt2 - s)^2 ln((sqrt2 - s)/(2 sqrt2))`` with the 0 ln 0 limit set to 0."""
    d = SQRT2 - np.sqrt(1.0 + b)
    arg = np.maximum(d / (2.0 * SQRT2), log_floor)
    return np.where(d > 0, d * d * np.log(arg), 0.0)


def bracket(B0, log_floor: float = 1e-30) -> np.ndarray:
    """``G(B0) = 1 - B0 + (sqrt2 - s)^2 ln((sqrt2 - s)/(2 sqrt2))``."""
    b = _real_b(B0)
    return 1.0 - b + _xlogx_term(b, log_floor)


def deformed_potential(B0: ComplexField, epsilon: float, mode="exact",
                       log_floor: float = 1e-30) -> ComplexField:
    """Deformed potential B from an (intermediate) undeformed B0.

    ``exact`` evaluates the closed quasi-sine-Gordon map; ``first_order`` is
    its linearization ``B0 + eps G(B0)``.  ``epsilon = 0`` returns B0.
    """
    mode = PotentialMode(mode.value if isinstance(mode, PotentialMode) else mode)
    if epsilon < 0:
        raise ParameterError("epsilon must be non-negative")
    b = _real_b(B0)
    if epsilon == 0:
        return ComplexField(B0.grid, B0.values.copy())
    if mode is PotentialMode.FIRST_ORDER:
        return ComplexField(B0.grid, b + epsilon * (1.0 - b + _xlogx_term(b, log_floor)))
    s = np.sqrt(1.0 + b)
    y = (SQRT2 - s) / (2.0 * SQRT2)
    ratio = (SQRT2 - s) / (SQRT2 + s)
    val = 1.0 - 32.0 / (2.0 + epsilon) ** 2 * ratio * (1.0 - y ** (1.0 + epsilon / 2.0)) ** 2
    return ComplexField(B0.grid, val)


def sg_deformed_potential(psi: ComplexField, epsilon: float, pole_tol: float = 1e-6) -> ComplexField:
    """``2/(2+eps)^2 tan^2(psi/4) (1 - |sin(psi/4)|^(2+eps))^2``."""
    if epsilon < 0:
        raise ParameterError("epsilon must be non-negative")
    q = np.real(psi.values) / 4.0
    c = np.cos(q)
    if np.any(np.abs(c) < pole_tol):
        raise DomainError("psi/4 within tolerance of a tan pole")
    val = 2.0 / (2.0 + epsilon) ** 2 * np.tan(q) ** 2 * (1.0 - np.abs(np.sin(q)) ** (2.0 + epsilon)) ** 2
    return ComplexField(psi.grid, val)


def undeformed_sg_potential(psi: ComplexField) -> ComplexField:
    return ComplexField(psi.grid, (1.0 - np.cos(np.real(psi.values))) / 16.0)


# -----------------------------------------------------------------------------
# First-order anomaly
# -----------------------------------------------------------------------------

def anomaly_first_order(B0: ComplexField, log_floor: float = 1e-30) -> ComplexField:
    """``X^1 = -(i/4) d_x G(B0)`` by finite differences."""
    G = bracket(B0, log_floor)
    return ComplexField(B0.grid, -0.25j * derivative_along(G, B0.grid.hx, 0))


def anomaly_first_order_one_soliton(grid: Grid, g_hat: float, delta: float = 0.0,
                                    printed: bool = False) -> ComplexField:
    """Closed form of X^1 on the single soliton, set to 0 on the line theta = 0.

    With tau = |tanh theta| and sigma = sign(theta):

        X^1 = (i g / 2) sigma sech^2 [1 + tau + 2 (1 - tau) ln((1 - tau)/2)].

    ``printed=True`` returns the form as printed instead, whose bracket reads
    ``3 tau - 1 + 2 (1 - tau) ln((1 - tau)/2)``.
    """
    X, T = grid.mesh()
    th = g_hat * X + T / g_hat + delta
    tau = np.abs(np.tanh(th))
    sig = np.sign(th)
    sech2 = 1.0 / np.cosh(th) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(tau < 1.0, np.log(np.maximum((1.0 - tau) / 2.0, 1e-300)), 0.0)
        lead = (3.0 * tau - 1.0) if printed else (1.0 + tau)
        val = 0.5j * g_hat * sig * sech2 * (lead + 2.0 * (1.0 - tau) * lg)
    return ComplexField(grid, np.where(th == 0, 0.0, val))


def one_sided_limit(g_hat: float, printed: bool = False) -> complex:
    """Limit of the closed form as theta -> 0+."""
    lead = -1.0 if printed else 1.0
    return 0.5j * g_hat * (lead + 2.0 * math.log(0.5))


# -----------------------------------------------------------------------------
# First-order correction
# -----------------------------------------------------------------------------

def source_term(A0: np.ndarray, B0: np.ndarray, log_floor: float = 1e-30) -> np.ndarray:
    """``A0 (G + B0) = A0 [1 + (sqrt2 - s)^2 ln(...)]``."""
    b = _real_b(B0)
    return A0 * (1.0 + _xlogx_term(b, log_floor))


def _base_sampler(base: AbSolution):
    """``t -> (A0(x, t), B0(x, t))`` on the grid x nodes at arbitrary t."""
    g = base.grid
    x = g.x
    if base.evaluator is not None:
        def sample(t):
            A, B = base.evaluator(x, np.full_like(x, t))
            return np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)
        return sample
    t_nodes = g.t
    A, B = base.A.values, base.B.values

    def sample(t):
        # cubic Lagrange through the 4 nearest t nodes
        j = int(np.clip(np.floor((t - t_nodes[0]) / g.ht) - 1, 0, g.nt - 4))
        ts = t_nodes[j:j + 4]
        w = np.ones(4)
        for a in range(4):
            for b in range(4):
                if a != b:
                    w[a] *= (t - ts[b]) / (ts[a] - ts[b])
        return A[:, j:j + 4] @ w, B[:, j:j + 4] @ w
    return sample


@dataclass
class SolveInfo:
    boundary: str
    initial_condition: str
    max_abs: float
    growth: float
    steps: int


def solve_first_order(base: AbSolution, cfg: QidConfig, return_info: bool = False):
    """Method-of-lines solution of ``(d_x d_t - B0) A1 = A0 (G + B0)``.

    With ``V = d_t A1`` the equation is ``d_x V = B0 A1 + S``.  V is the
    x-antiderivative of the right side, anchored at the boundary chosen by
    ``cfg.boundary``, and A1 is marched from ``A1(., 0) = 0`` to +T and -T
    with classical RK4.
    """
    g = base.grid
    hx = g.hx
    sample = _base_sampler(base)
    j0 = g.origin[1]
    out = np.zeros(g.shape, dtype=complex)
    n_sub = int(cfg.solver_substeps)
    peak_src = float(np.max(np.abs(source_term(base.A.values, base.B.values, cfg.log_floor))))
    steps = 0

    def rhs_factory(anchor_right: bool):
        def rhs(t, a):
            A0, B0 = sample(t)
            f = B0.real * a + source_term(A0, B0, cfg.log_floor)
            if anchor_right:
                return -cumulative_simpson(f[::-1], hx)[::-1]
            return cumulative_simpson(f, hx)
        return rhs

    for direction in (+1, -1):
        anchor_right = cfg.boundary == "upwind" and direction > 0
        rhs = rhs_factory(anchor_right)
        a = np.zeros(g.nx, dtype=complex)
        h = direction * g.ht / n_sub
        j = j0
        t = 0.0
        while 0 <= j + direction < g.nt:
            for _ in range(n_sub):
                k1 = rhs(t, a)
                k2 = rhs(t + h / 2, a + h / 2 * k1)
                k3 = rhs(t + h / 2, a + h / 2 * k2)
                k4 = rhs(t + h, a + h * k3)
                a = a + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
                steps += 1
            j += direction
            t = g.t[j]
            out[:, j] = a
            m = float(np.max(np.abs(a)))
            if not np.isfinite(m) or m > GROWTH_LIMIT * max(peak_src, 1.0):
                raise SolverError("first-order correction diverged",
                                  {"t": float(t), "max_abs": m, "boundary": cfg.boundary,
                                   "direction": direction})
    field_ = ComplexField(g, out)
    if not return_info:
        return field_
    m = float(np.max(np.abs(out)))
    info = SolveInfo(cfg.boundary, "A1(x, 0) = 0", m, m / max(peak_src, 1e-300), steps)
    return field_, info


def plug_back_residual(base: AbSolution, a1: ComplexField, log_floor: float = 1e-30,
                       band: int = 2) -> dict:
    """Relative L2 residual of ``(d_x d_t - B0) A1 - S`` on the grid.

    Nodes where B0 is within a few cells of -1 (where S has a kink) are left
    out, together with the usual boundary band.
    """
    g = a1.grid
    A1 = a1.values
    op = derivative_along(derivative_along(A1, g.ht, 1), g.hx, 0) - base.B.values.real * A1
    S = source_term(base.A.values, base.B.values, log_floor)
    res = op - S
    keep = np.zeros(g.shape, dtype=bool)
    keep[band:-band, band:-band] = True
    kink = kink_mask(base.B)
    keep &= ~kink
    num = l2_norm(res, g, keep)
    den = l2_norm(S, g, keep)
    return {"relative": num / den if den > 0 else num, "absolute": num,
            "excluded_nodes": int((~keep).sum())}


def kink_mask(B0: ComplexField, width: float = 3.0) -> np.ndarray:
    """Nodes where ``s = sqrt(1 + B0)`` is within ``width`` cells of zero."""
    g = B0.grid
    s = np.sqrt(1.0 + np.clip(B0.values.real, -1.0, 1.0))
    s_x = np.abs(derivative_along(s, g.hx, 0))
    s_t = np.abs(derivative_along(s, g.ht, 1))
    reach = width * (g.hx * s_x.max() + g.ht * s_t.max())
    return s < reach


# -----------------------------------------------------------------------------
# Assembled run and report
# -----------------------------------------------------------------------------

@dataclass
class QidRun:
    base: AbSolution
    cfg: QidConfig
    a1_field: ComplexField
    A: ComplexField
    B: ComplexField
    anomaly1: ComplexField
    solution: AbSolution
    status: str = "ok"
    info: dict = field(default_factory=dict)


def deformed_fields(base: AbSolution, a1: ComplexField, epsilon: float,
                    log_floor: float = 1e-30) -> tuple:
    g = base.grid
    A0 = base.A.values
    A1 = a1.values
    G = bracket(base.B, log_floor)
    cross = A0 * np.conj(A1) + np.conj(A0) * A1
    corr = antiderivative_x(ComplexField(g, derivative_along(cross, g.ht, 1))).values
    B = base.B.values.real + epsilon * (G - 0.5 * corr.real)
    return ComplexField(g, A0 + epsilon * A1), ComplexField(g, B)


def qid_solution(base: AbSolution, cfg: QidConfig, a1: ComplexField | None = None) -> QidRun:
    """First-order quasi-deformed pair ``A = A0 + eps A1`` and the matching B."""
    info = {}
    if a1 is None:
        a1, si = solve_first_order(base, cfg, return_info=True)
        info["solver"] = si.__dict__
    A, B = deformed_fields(base, a1, cfg.epsilon, cfg.log_floor)
    status = "ok"
    if cfg.epsilon * a1.max_abs() > base.A.max_abs():
        status = "perturbative_sanity_violated"
        warnings.warn("eps*max|A1| exceeds max|A0|; first-order truncation is not reliable",
                      RuntimeWarning, stacklevel=2)
    sol = AbSolution(f"qid[{base.name}]", A, B, dict(base.params, epsilon=cfg.epsilon),
                     exact=False, meta={"base": base.name})
    return QidRun(base, cfg, a1, A, B, anomaly_first_order(base.B, cfg.log_floor), sol,
                  status, info)


class Verdict(enum.Enum):
    LOCAL = "LocallyConserved"
    ASYMPTOTIC = "AsymptoticallyConserved"
    NOT_PROTECTED = "NotProtected"


def anomaly_remainder(run: QidRun) -> float:
    """``||X(A, B) - eps X^1|| / (eps ||X^1||)`` in discrete L2 over the interior."""
    g = run.A.grid
    X = anomaly(run.solution).values
    keep = np.zeros(g.shape, dtype=bool)
    keep[2:-2, 2:-2] = True
    ref = run.cfg.epsilon * run.anomaly1.values
    den = l2_norm(ref, g, keep)
    return l2_norm(X - ref, g, keep) / den if den > 0 else float("inf")


def qid_report(run: QidRun, ns=(1, 2, 3, 4), kappa: float = 1.0) -> dict:
    """Charges, balance, asymptotic conservation, parity and per-charge verdicts."""
    s = run.solution
    series = la.charges(s, ns, kappa)
    balance = la.charge_balance(s, [n for n in ns if n != 2], kappa,
                                series=[c for c in series if c.n != 2])
    X = la.anomaly_values(s)
    asym = {n: la.asymptotic_conservation(s, n, kappa, anomaly=X) for n in ns}
    kink = kink_mask(run.base.B)
    parity = {}
    for name, f, excl in (("re_A", run.A.real, None), ("im_A", run.A.imag, None),
                          ("B", run.B.real, None), ("anomaly", ComplexField(s.grid, X), kink),
                          ("A1", run.a1_field, None), ("anomaly1", run.anomaly1, kink)):
        parity[name] = parity_split(f, "space_time", exclude=excl)[2].to_dict()
    verdicts = {}
    for n in ns:
        if n == 2:
            verdicts[n] = Verdict.LOCAL
        elif asym[n].status in (la.Protection.TRIVIAL, la.Protection.PROTECTED):
            verdicts[n] = Verdict.ASYMPTOTIC
        else:
            verdicts[n] = Verdict.NOT_PROTECTED
    return {
        "epsilon": run.cfg.epsilon,
        "boundary": run.cfg.boundary,
        "initial_condition": "A1(x, 0) = 0",
        "anomaly1_at_theta0": "set to 0 by odd symmetry",
        "status": run.status,
        "charges": {str(c.n): {"q_first": [c.q_of_t[0].real, c.q_of_t[0].imag],
                               "q_last": [c.q_of_t[-1].real, c.q_of_t[-1].imag],
                               "drift": c.drift()} for c in series},
        "balance": {str(b.n): b.to_dict() for b in balance},
        "asymptotic": {str(n): a.to_dict() for n, a in asym.items()},
        "parity": parity,
        "verdicts": {str(n): v.value for n, v in verdicts.items()},
        "anomaly_remainder": anomaly_remainder(run),
        **run.info,
    }


def first_order_protection(base: AbSolution, n: int, epsilon: float = 0.1, kappa: float = 1.0,
                           log_floor: float = 1e-30) -> la.AsymptoticReport:
    """Quasi-conservation test at first order: anomaly ``eps X^1``, undeformed ``f0``."""
    X1 = anomaly_first_order(base.B, log_floor).values
    return la.asymptotic_conservation(base, n, kappa, anomaly=epsilon * X1)
