import numpy as np
import pytest

from abdeform import nhd
from abdeform import solutions as S
from abdeform.errors import ParameterError
from abdeform.numerics import ComplexField, Grid, differentiate


@pytest.fixture(scope="module")
def sol_report(soliton):
    return nhd.nhd_from_ansatz(soliton.A)


@pytest.fixture(scope="module")
def kink(grid):
    A = S.kink_ansatz(1.5, 0.0, grid)
    return A, nhd.nhd_from_ansatz(A), nhd.nhd_closed_forms("kink", grid, a=1.5)


def test_one_soliton_closed_forms(sol_report, grid):
    dev = nhd.compare(sol_report, nhd.nhd_closed_forms("one_soliton", grid, g_hat=1.5))
    assert max(dev.values()) <= 1e-4


def test_one_soliton_is_valid(sol_report):
    assert sol_report.classification is nhd.NhdClass.VALID
    assert sol_report.diagnostics["singular_nodes"] == 0


def test_one_soliton_shift_at_peak(sol_report, grid):
    assert sol_report.beta_d.at(0.0, 0.0) == pytest.approx(-2.0, abs=1e-6)


@pytest.mark.parametrize("delta", [-0.7, 0.5])
def test_shift_parameter_translates_closed_forms(delta):
    g = Grid.parse("8,3,801,301")
    s = S.one_soliton(1.5, delta, g)
    dev = nhd.compare(nhd.nhd_from_ansatz(s.A), nhd.nhd_closed_forms("one_soliton", g, 1.5, delta=delta))
    assert max(dev.values()) <= 1e-4


def test_kink_closed_forms(kink):
    _, r, cf = kink
    assert max(nhd.compare(r, cf).values()) <= 1e-4


def test_kink_is_valid(kink):
    assert kink[1].classification is nhd.NhdClass.VALID


def test_kink_shift_asymptotes(kink, grid):
    _, r, _ = kink
    lim = nhd.kink_limits(1.5)
    j = grid.t_index(0.0)
    assert r.beta_d.values[-3, j].real == pytest.approx(lim["beta_plus_inf"], abs=1e-4)
    assert r.beta_d.at(0.0, 0.0).real == pytest.approx(lim["beta_at_zero"], abs=1e-4)


@pytest.mark.xfail(strict=True, reason="printed kink shift has the wrong sign and u2 misses a factor")
def test_kink_printed_forms(kink):
    _, r, cf = kink
    assert max(nhd.compare(r, cf, printed=True, fields=("u2", "beta_d")).values()) <= 1e-4


def test_kink_printed_velocity_agrees(kink):
    _, r, cf = kink
    assert nhd.compare(r, cf, printed=True, fields=("v2",))["v2"] <= 1e-4


@pytest.mark.parametrize("name", ["two_soliton", "kk", "kak"])
def test_invalid_ansatze(grid, name):
    out = S.build(name, {}, grid)
    field = out.A if isinstance(out, S.AbSolution) else out
    assert nhd.nhd_from_ansatz(field).classification is not nhd.NhdClass.VALID


def test_zero_ansatz_rejected(small_grid):
    with pytest.raises(ParameterError):
        nhd.nhd_from_ansatz(ComplexField.zeros(small_grid))


def test_normalization_constraint_holds(sol_report, soliton, kink):
    assert nhd.nhd_constraint_residuals(sol_report, soliton.A)["normalization"] <= 1e-4
    A, r, _ = kink
    assert nhd.nhd_constraint_residuals(r, A)["normalization"] <= 1e-4


@pytest.mark.xfail(strict=True, reason="u2 from the v2 relation does not satisfy the first constraint")
def test_first_constraint_one_soliton(sol_report, soliton):
    assert nhd.nhd_constraint_residuals(sol_report, soliton.A)["first"] <= 1e-4


@pytest.mark.xfail(strict=True, reason="u2 from the v2 relation does not satisfy the substituted constraint")
def test_substituted_constraint_one_soliton(sol_report, soliton):
    assert nhd.nhd_constraint_residuals(sol_report, soliton.A)["substituted"] <= 1e-4


@pytest.mark.xfail(strict=True, reason="same inconsistency for the kink")
def test_constraints_kink(kink):
    A, r, _ = kink
    norms = nhd.nhd_constraint_residuals(r, A)
    assert max(norms["first"], norms["substituted"]) <= 1e-4


@pytest.mark.xfail(strict=True, reason="the two u2 routes differ by gamma")
def test_u2_routes_agree(sol_report):
    assert sol_report.diagnostics["u2_route_gap"] <= 1e-4


def test_u2_route_gap_is_exactly_the_amplitude(sol_report):
    assert sol_report.diagnostics["u2_route_gap"] == pytest.approx(1.5, abs=1e-4)


def test_noise_control_breaks_constraints(soliton, grid):
    rng = np.random.default_rng(7)
    noisy = ComplexField(grid, soliton.A.values * (1 + 1e-3 * rng.normal(size=grid.shape)))
    norms = nhd.nhd_constraint_residuals(nhd.nhd_from_ansatz(noisy), noisy)
    assert norms["normalization"] >= 0.1
    assert norms["first"] >= 0.1


@pytest.mark.parametrize("theta", np.linspace(-4, 4, 9))
def test_closed_forms_internal_relation(theta):
    # v2_x + A u2 = 0 for the single soliton, evaluated on a 1-D slice
    g = Grid(6.0, 1.0, 2401, 5)
    cf = nhd.nhd_closed_forms("one_soliton", g, 1.5)
    s = S.one_soliton(1.5, 0.0, g)
    lhs = differentiate(cf.v2, "x") + s.A * cf.u2
    i = g.x_index(theta / 1.5)
    assert abs(lhs.values[i, 2]) < 1e-8


def test_closed_forms_reject_zero_parameters(small_grid):
    with pytest.raises(ParameterError):
        nhd.nhd_closed_forms("one_soliton", small_grid, g_hat=0.0)
    with pytest.raises(ParameterError):
        nhd.nhd_closed_forms("kink", small_grid, a=0.0)
