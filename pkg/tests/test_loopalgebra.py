import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abdeform import laxcurv as lc
from abdeform import loopalgebra as la
from abdeform import solutions as S
from abdeform.errors import AlgebraError, ParameterError
from abdeform.numerics import Grid

FLOOR = -30

cplx = st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def elements(draw, kappa):
    grades = draw(st.lists(st.integers(-3, 2), min_size=1, max_size=4, unique=True))
    return la.LoopElement({n: (draw(cplx), draw(cplx), draw(cplx)) for n in grades}, kappa, FLOOR)


def close(e1, e2, tol=1e-9):
    scale = max(1.0, e1.max_abs(), e2.max_abs())
    return (e1 - e2).max_abs() <= tol * scale


kappas = st.sampled_from([1.0, -1.0])


@settings(max_examples=50, deadline=None)
@given(st.data(), kappas)
def test_commutator_antisymmetric(data, kappa):
    x, y = data.draw(elements(kappa)), data.draw(elements(kappa))
    assert close(la.commutator(x, y), la.commutator(y, x) * -1.0)


@settings(max_examples=50, deadline=None)
@given(st.data(), kappas, cplx)
def test_commutator_bilinear(data, kappa, s):
    x, y, z = (data.draw(elements(kappa)) for _ in range(3))
    assert close(la.commutator(x * s + y, z), la.commutator(x, z) * s + la.commutator(y, z))


@settings(max_examples=50, deadline=None)
@given(st.data(), kappas)
def test_jacobi_identity(data, kappa):
    x, y, z = (data.draw(elements(kappa)) for _ in range(3))
    C = la.commutator
    total = C(x, C(y, z)) + C(y, C(z, x)) + C(z, C(x, y))
    assert total.max_abs() <= 1e-9 * max(1.0, x.max_abs() * y.max_abs() * z.max_abs())


@settings(max_examples=50, deadline=None)
@given(st.data(), kappas, cplx.filter(lambda z: abs(z) > 0.3))
def test_to_matrix_is_a_homomorphism(data, kappa, lam):
    x, y = data.draw(elements(kappa)), data.draw(elements(kappa))
    X, Y = x.to_matrix(lam), y.to_matrix(lam)
    lhs = la.commutator(x, y).to_matrix(lam)
    rhs = X @ Y - Y @ X
    assert np.allclose(lhs, rhs, atol=1e-8 * max(1.0, np.abs(rhs).max()))


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_basis_brackets(kappa):
    b = lambda kind, n: la.basis(kind, n, kappa, FLOOR)
    assert close(la.commutator(b("b", 1), b("F1", -2)), b("F2", -1) * 2.0)
    assert close(la.commutator(b("b", 0), b("F2", 3)), b("F1", 3) * 2.0)
    assert close(la.commutator(b("F1", -1), b("F2", -1)), b("b", -2) * kappa)


def test_truncation_drops_low_grades():
    x = la.basis("F1", -3, 1.0, -4)
    y = la.basis("F2", -2, 1.0, -4)
    assert la.commutator(x, y).coeffs == {}


def test_kappa_validation_and_mismatch():
    with pytest.raises(ParameterError):
        la.LoopElement({}, kappa=0.5)
    with pytest.raises(AlgebraError):
        la.commutator(la.basis("b", 0, 1.0), la.basis("b", 0, -1.0))


def test_exponent_must_lower_grade():
    with pytest.raises(AlgebraError):
        la.bch_conjugate(la.basis("b", 1), la.basis("F1", 0))


def test_bch_matches_matrix_exponential():
    from scipy.linalg import expm
    rng = np.random.default_rng(3)
    J = la.LoopElement({-1: (0j, *rng.normal(size=2)), -2: (0j, *rng.normal(size=2))}, 1.0, -12)
    x = la.LoopElement({1: (1.0, 0.3, -0.2), 0: (0.5j, 1.0, 2.0)}, 1.0, -12)
    out = la.bch_conjugate(x, J)
    # truncation at grade -12 is invisible at large |lam|
    lam = 7.0
    Jm = J.to_matrix(lam)
    ref = expm(Jm) @ x.to_matrix(lam) @ expm(-Jm)
    assert np.allclose(out.to_matrix(lam), ref, atol=1e-9)


def test_spatial_lax_matches_matrix_form(small_grid):
    s = S.one_soliton(1.5, 0.3, small_grid)
    ap = la.ApmFields.from_solution(s)
    lam = 0.4 + 1.1j
    got = la.spatial_lax(ap).to_matrix(lam)
    ref = lc.lax_pair(s, lam).L
    assert np.allclose(got, ref, atol=1e-12)


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_rotated_curvature_coefficients_at_random_nodes(kappa, rng):
    g = Grid.parse("10,5,801,401")
    s = S.one_soliton(1.5, 0.2, g)
    ap = la.ApmFields.from_solution(s, kappa)
    J = la.gauge_coeffs(ap).exponent(kappa)
    f0, f1, f2 = la.curvature_coeffs(ap)
    idx = (rng.integers(4, g.nx - 4, 50), rng.integers(4, g.nt - 4, 50))
    Jn = J.map(lambda c: np.asarray(c)[idx] if np.ndim(c) == 2 else c)
    rotated = la.bch_conjugate(la.basis("b", -1, kappa), Jn)
    worst = 0.0
    for n in (-1, -2, -3, -4):
        cb, c1, c2 = (np.broadcast_to(c, (50,)) for c in rotated.get(n))
        worst = max(worst, np.abs(cb - f0[n][idx]).max(), np.abs(c1 - f1[n][idx]).max(),
                    np.abs(c2 - f2[n][idx]).max())
    assert worst <= 1e-8


def test_f0_minus_two_is_exactly_zero(soliton):
    ap = la.ApmFields.from_solution(soliton)
    assert np.all(la.f0_coeff(ap, 2) == 0)


@pytest.fixture(scope="module")
def abel_report(soliton):
    return la.verify_abelianization(soliton)


def test_abelianization_image_vanishes(abel_report):
    img, _ = abel_report.asserted_max()
    assert img <= 1e-4


def test_abelianization_kernel_matches_closed_forms(abel_report):
    _, ker = abel_report.asserted_max()
    assert ker <= 1e-4


@pytest.fixture(scope="module")
def soliton_charges(soliton):
    return {c.n: c for c in la.charges(soliton, (1, 2, 3, 4))}


def test_first_charge_value(soliton_charges):
    j0 = int(np.argmin(np.abs(soliton_charges[1].t)))
    assert abs(soliton_charges[1].q_of_t[j0] - (-1.5j)) <= 1e-6


@pytest.mark.parametrize("n", [1, 3, 4])
def test_charge_drift(soliton_charges, n):
    assert soliton_charges[n].drift() <= 1e-6


def test_even_charge_vanishes_for_real_amplitude(soliton_charges):
    assert np.abs(soliton_charges[2].q_of_t).max() <= 1e-10


@pytest.mark.parametrize("g_hat", [0.7, 1.5, 2.5])
def test_first_charge_scales_with_amplitude(g_hat):
    q = la.charges(S.one_soliton(g_hat, 0.0, Grid.parse("12,1,2401,21")), (1,))[0]
    assert q.q_of_t[10] == pytest.approx(-1j * g_hat, abs=1e-6)


def test_unsupported_charge_index(soliton):
    with pytest.raises(ParameterError):
        la.charges(soliton, (5,))


def test_undeformed_balance_is_at_noise_level(small_grid):
    s = S.one_soliton(1.5, 0.0, small_grid)
    for rep in la.charge_balance(s):
        assert rep.dq_max < 1e-5
        assert rep.mismatch < 1e-5


def test_undeformed_asymptotic_conservation_is_trivial(soliton):
    rep = la.asymptotic_conservation(soliton, 1)
    assert rep.status is la.Protection.TRIVIAL


def test_asymptotic_conservation_odd_anomaly_is_protected(small_grid):
    s = S.one_soliton(1.5, 0.0, small_grid)
    X, T = small_grid.mesh()
    odd = np.tanh(X) * np.exp(-X * X - T * T) * 1j
    rep = la.asymptotic_conservation(s, 1, anomaly=odd)
    assert rep.status is la.Protection.PROTECTED


def test_asymptotic_conservation_even_anomaly_is_not_protected(small_grid):
    s = S.one_soliton(1.5, 0.0, small_grid)
    X, T = small_grid.mesh()
    rep = la.asymptotic_conservation(s, 1, anomaly=np.exp(-X * X - T * T) + 0j)
    assert rep.status is la.Protection.NOT_PROTECTED
    assert rep.ratio > 0.5
