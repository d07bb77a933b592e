import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abdeform import loopalgebra as la
from abdeform import qid as Q
from abdeform import solutions as S
from abdeform.errors import DomainError, ParameterError
from abdeform.numerics import ComplexField, ConvergenceStudy, Grid, l2_norm, parity_split
from abdeform.laxcurv import anomaly


@pytest.fixture(scope="module")
def medium():
    return Grid.parse("10,5,1001,501")


@pytest.fixture(scope="module")
def med_soliton(medium):
    return S.one_soliton(1.5, 0.0, medium)


@pytest.fixture(scope="module")
def med_a1(med_soliton):
    return Q.solve_first_order(med_soliton, Q.QidConfig())


@pytest.fixture(scope="module")
def default_a1(soliton):
    return Q.solve_first_order(soliton, Q.QidConfig(), return_info=True)


# -- the bracket G and the deformed potential -------------------------------------

def test_bracket_endpoint_values():
    G = Q.bracket(np.array([1.0, -1.0, 0.0]))
    assert G[0] == 0.0
    assert G[1] == pytest.approx(2.0 - 2.0 * math.log(2.0), abs=1e-15)
    s = 1.0
    assert G[2] == pytest.approx(1.0 + (math.sqrt(2) - s) ** 2 * math.log((math.sqrt(2) - s) / (2 * math.sqrt(2))))


def test_bracket_domain():
    with pytest.raises(DomainError):
        Q.bracket(np.array([1.01]))
    assert np.isfinite(Q.bracket(np.array([1.0 + 1e-9, -1.0 - 1e-9]))).all()


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_bracket_nonnegative_and_finite(b):
    G = float(Q.bracket(np.array([b]))[0])
    assert np.isfinite(G) and G >= -1e-15


def test_epsilon_zero_is_identity(med_soliton):
    for mode in ("exact", "first_order"):
        out = Q.deformed_potential(med_soliton.B, 0.0, mode)
        assert np.array_equal(out.values, med_soliton.B.values)


def test_negative_epsilon_rejected(med_soliton):
    with pytest.raises(ParameterError):
        Q.deformed_potential(med_soliton.B, -0.1)
    with pytest.raises(ParameterError):
        Q.QidConfig(epsilon=-1.0)
    with pytest.raises(ParameterError):
        Q.QidConfig(boundary="right")


def test_exact_map_matches_sine_gordon_potential(med_soliton):
    psi = ComplexField(med_soliton.grid, np.arccos(np.clip(med_soliton.B.values.real, -1, 1)))
    for eps in (0.1, 0.5):
        exact = Q.deformed_potential(med_soliton.B, eps)
        sg = Q.sg_deformed_potential(psi, eps)
        assert np.abs(exact.values - (1.0 - 16.0 * sg.values)).max() <= 1e-12
    base = Q.undeformed_sg_potential(psi)
    assert np.abs(med_soliton.B.values - (1.0 - 16.0 * base.values)).max() <= 1e-12


def test_sine_gordon_pole_rejected(small_grid):
    psi = ComplexField(small_grid, 2 * np.pi)
    with pytest.raises(DomainError):
        Q.sg_deformed_potential(psi, 0.1)


def _gap(B0, eps, sign=1.0):
    exact = Q.deformed_potential(B0, eps).values
    lin = B0.values.real + sign * eps * Q.bracket(B0)
    return float(np.abs(exact - lin).max())


def test_first_order_map_is_the_linearization(med_soliton):
    study = ConvergenceStudy()
    for eps in (0.2, 0.1, 0.05):
        lin = Q.deformed_potential(med_soliton.B, eps, "first_order").values
        study.add(eps, float(np.abs(Q.deformed_potential(med_soliton.B, eps).values - lin).max()))
    assert study.min_order >= 1.8


@pytest.mark.xfail(strict=True, reason="with a minus sign on G the gap is first order in eps")
def test_minus_sign_linearization(med_soliton):
    study = ConvergenceStudy()
    for eps in (0.2, 0.1, 0.05):
        study.add(eps, _gap(med_soliton.B, eps, sign=-1.0))
    assert study.min_order >= 1.8


# -- first-order anomaly -----------------------------------------------------------

def _off_kink(B0, grid, nodes=3):
    keep = ~Q.kink_mask(B0)
    keep[:nodes] = keep[-nodes:] = False
    return keep


def test_anomaly_closed_form_matches_finite_differences(med_soliton, medium):
    fd = Q.anomaly_first_order(med_soliton.B)
    cf = Q.anomaly_first_order_one_soliton(medium, 1.5)
    keep = _off_kink(med_soliton.B, medium)
    assert np.abs(fd.values - cf.values)[keep].max() <= 1e-5


@pytest.mark.xfail(strict=True, reason="printed bracket has 3 tau - 1 instead of 1 + tau")
def test_printed_anomaly_closed_form(med_soliton, medium):
    fd = Q.anomaly_first_order(med_soliton.B)
    cf = Q.anomaly_first_order_one_soliton(medium, 1.5, printed=True)
    keep = _off_kink(med_soliton.B, medium)
    assert np.abs(fd.values - cf.values)[keep].max() <= 1e-4


def test_anomaly_is_odd_away_from_kink(soliton):
    X1 = Q.anomaly_first_order(soliton.B)
    rep = parity_split(X1, "space_time", exclude=Q.kink_mask(soliton.B))[2]
    assert rep.dominant.value == "Odd"
    assert rep.ratio <= 1e-3


def test_anomaly_closed_form_vanishes_on_the_kink_line(medium):
    cf = Q.anomaly_first_order_one_soliton(medium, 1.5)
    assert cf.at(0.0, 0.0) == 0


def test_one_sided_limit_value():
    assert Q.one_sided_limit(1.5) == pytest.approx(0.75j * (1 - 2 * math.log(2)), abs=1e-15)


def test_one_sided_limit_by_finite_differences(soliton, grid):
    # first node whose five-point stencil does not straddle theta = 0
    X1 = Q.anomaly_first_order(soliton.B)
    j = grid.t_index(0.0)
    val = X1.values[grid.x_index(0.0) + 2, j]
    lim = Q.one_sided_limit(1.5)
    assert abs(val - lim) <= 0.05 * abs(lim)


@pytest.mark.xfail(strict=True, reason="printed limit corresponds to the printed bracket")
def test_printed_one_sided_limit(soliton, grid):
    X1 = Q.anomaly_first_order(soliton.B)
    val = X1.values[grid.x_index(0.0) + 2, grid.t_index(0.0)]
    assert abs(val - Q.one_sided_limit(1.5, printed=True)) <= 0.1 * abs(val)


# -- the first-order solver --------------------------------------------------------

def test_solver_info_and_initial_condition(default_a1, grid):
    a1, info = default_a1
    assert info.boundary == "upwind" and info.steps == grid.nt - 1
    assert np.abs(a1.values[:, grid.t_index(0.0)]).max() == 0.0


def test_plug_back_residual(soliton, default_a1):
    assert Q.plug_back_residual(soliton, default_a1[0])["relative"] <= 1e-3


def test_plug_back_converges(med_soliton, med_a1, soliton, default_a1):
    coarse = Q.plug_back_residual(med_soliton, med_a1)["relative"]
    fine = Q.plug_back_residual(soliton, default_a1[0])["relative"]
    assert fine < coarse / 2


def test_correction_is_even(default_a1):
    assert parity_split(default_a1[0], "space_time")[2].ratio <= 1e-10


@pytest.mark.xfail(strict=True, reason="upwind correction still carries a 1.6% tail at the edges")
def test_correction_is_localized(default_a1, grid):
    a1 = np.abs(default_a1[0].values)
    j = grid.t_index(0.0) + 100
    assert max(a1[0, j], a1[-1, j]) <= 1e-2 * a1[:, j].max()


@pytest.mark.xfail(strict=True, reason="left-edge anchoring grows exponentially and loses parity")
def test_left_boundary_keeps_parity(med_soliton):
    a1 = Q.solve_first_order(med_soliton, Q.QidConfig(boundary="left"))
    assert parity_split(a1, "space_time")[2].ratio <= 0.1


def test_solver_is_deterministic(med_soliton, med_a1):
    again = Q.solve_first_order(med_soliton, Q.QidConfig())
    assert np.array_equal(again.values, med_a1.values)


# -- the assembled first-order pair ---------------------------------------------------

def test_anomaly_epsilon_scaling(med_soliton, med_a1):
    study = ConvergenceStudy()
    g = med_soliton.grid
    keep = np.zeros(g.shape, dtype=bool)
    keep[2:-2, 2:-2] = True
    for eps in (0.1, 0.05, 0.025):
        run = Q.qid_solution(med_soliton, Q.QidConfig(epsilon=eps), a1=med_a1)
        study.add(eps, l2_norm(anomaly(run.solution).values - eps * run.anomaly1.values, g, keep))
    assert study.min_order >= 1.8


@pytest.mark.xfail(strict=True, reason="second-order remainder is about 6.9 eps relative to the first-order anomaly")
def test_anomaly_remainder_small(med_soliton, med_a1):
    run = Q.qid_solution(med_soliton, Q.QidConfig(epsilon=0.1), a1=med_a1)
    assert Q.anomaly_remainder(run) <= 0.2


def test_deformed_pair_at_zero_epsilon_is_the_base(med_soliton, med_a1):
    run = Q.qid_solution(med_soliton, Q.QidConfig(epsilon=0.0), a1=med_a1)
    assert np.array_equal(run.A.values, med_soliton.A.values)
    assert np.array_equal(run.B.values.real, med_soliton.B.values.real)


def test_perturbative_sanity_warning(med_soliton, med_a1):
    with pytest.warns(RuntimeWarning):
        run = Q.qid_solution(med_soliton, Q.QidConfig(epsilon=0.5), a1=med_a1)
    assert run.status == "perturbative_sanity_violated"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert Q.qid_solution(med_soliton, Q.QidConfig(epsilon=0.01), a1=med_a1).status == "ok"


@pytest.fixture(scope="module")
def med_run(med_soliton, med_a1):
    return Q.qid_solution(med_soliton, Q.QidConfig(epsilon=0.1), a1=med_a1)


def test_report_verdicts(med_run):
    rep = Q.qid_report(med_run)
    assert rep["verdicts"] == {"1": "AsymptoticallyConserved", "2": "LocallyConserved",
                               "3": "AsymptoticallyConserved", "4": "AsymptoticallyConserved"}
    assert rep["parity"]["A1"]["dominant"] == "Even"


def test_first_charge_balance_closes_with_boundary_flux(med_run):
    rep = la.charge_balance(med_run.solution, (1,))[0]
    assert rep.closed_mismatch <= 1e-2


def test_fourth_charge_balance_is_trivial_for_real_amplitude(med_run):
    assert la.charge_balance(med_run.solution, (4,))[0].mismatch <= 1e-2


@pytest.mark.xfail(strict=True, reason="B moves at the x edges at first order, so Q^-1 picks up a boundary flux")
def test_first_charge_balance_without_boundary_term(med_run):
    assert la.charge_balance(med_run.solution, (1,))[0].mismatch <= 1e-2


@pytest.mark.xfail(strict=True, reason="the A1 source leaves the s+- curvature channels non-flat")
def test_third_charge_balance(med_run):
    assert la.charge_balance(med_run.solution, (3,))[0].mismatch <= 1e-2


@pytest.mark.parametrize("n", [1, 3, 4])
def test_first_order_protection_even_base(med_soliton, n):
    rep = Q.first_order_protection(med_soliton, n)
    assert rep.status in (la.Protection.PROTECTED, la.Protection.TRIVIAL)
    assert rep.ratio <= 1e-3


@pytest.mark.xfail(strict=True, reason="a shifted single soliton is still a travelling wave; each time slice integrates to zero")
def test_shifted_soliton_loses_protection(medium):
    s = S.one_soliton(1.5, 1.0, medium)
    assert Q.first_order_protection(s, 1).ratio >= 0.1


def test_first_charge_is_the_mass_integral(med_run):
    from abdeform.numerics import derivative_along, simpson
    g = med_run.A.grid
    q = la.charges(med_run.solution, (1,))[0]
    mass = -0.125j * simpson(np.abs(med_run.A.values) ** 2, g.hx, axis=0)
    d1 = derivative_along(q.q_of_t, g.ht, 0)
    d2 = derivative_along(mass, g.ht, 0)
    assert np.abs(d1 - d2).max() <= 1e-6 * np.abs(d2).max()


@pytest.mark.xfail(strict=True, reason="the source is not smooth across B0 = -1, which caps the time order near 1.5")
def test_plug_back_time_order():
    study = ConvergenceStudy()
    for nt in (127, 251, 501):
        g = Grid(10.0, 5.0, 1001, nt)
        s = S.one_soliton(1.5, 0.0, g)
        study.add(g.ht, Q.plug_back_residual(s, Q.solve_first_order(s, Q.QidConfig()))["relative"])
    assert study.min_order >= 3.5


@pytest.mark.xfail(strict=True, reason="a shifted single soliton keeps its travelling-wave symmetry")
def test_shifted_run_third_charge_not_protected(medium):
    s = S.one_soliton(1.5, 1.0, medium)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = Q.qid_solution(s, Q.QidConfig(epsilon=0.1))
    assert Q.qid_report(run, (3,))["verdicts"]["3"] == "NotProtected"
