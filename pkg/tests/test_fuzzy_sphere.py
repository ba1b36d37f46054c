import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from fuzcal.errors import (
    DimensionError,
    DomainError,
    ParseError,
    PreconditionError,
    UnsupportedRepresentationError,
)
from fuzcal.fuzzy_sphere import (
    DeltaFull,
    DeltaPhi,
    DeltaSigmaDiag,
    Pointwise,
    Polynomial,
    SigmaProfile,
    SpherePoint,
    VortexPower,
    build_generators,
    correspondence_residuals,
    diagonal_delta_pairing_residual,
    embed,
    full_delta_pairing_residual,
    fuzzy_norm,
    fuzzy_sphere_relation_residual,
    pairing_identity_check,
    parse_function,
    quantize,
    rotate_z,
    rotation_unitary,
    sample_points,
    sigma_preset,
    sphere_average,
    sphere_bracket,
    sphere_moment,
    vortex_factor_diagonals,
    vortex_factorization_residual,
)
from fuzcal.tensor import TensorOperator

X1, X2, X3 = (Polynomial.coordinate(i) for i in (1, 2, 3))

MONOMIALS = [m for m in itertools.product(range(4), repeat=3) if sum(m) <= 3]


@st.composite
def polynomials(draw, real=True, max_terms=4):
    monos = draw(st.lists(st.sampled_from(MONOMIALS), min_size=1, max_size=max_terms, unique=True))
    coeffs = draw(st.lists(st.integers(-3, 3), min_size=len(monos), max_size=len(monos)))
    terms = {m: float(c) for m, c in zip(monos, coeffs)}
    if not real:
        terms = {m: c * (1 + 0.5j) for m, c in terms.items()}
    return Polynomial(terms)


# sphere grid away from the poles
_S, _P = np.meshgrid(np.linspace(-0.9, 0.9, 7), np.linspace(-3.0, 3.0, 9), indexing="ij")


def _on_grid(f):
    return f.evaluate(_S, _P)


# ---------------------------------------------------------------------------
# generators


def test_generators_n2():
    x1, x2, x3 = build_generators(2)
    np.testing.assert_allclose(np.diag(x3).real, [1 / math.sqrt(3), -1 / math.sqrt(3)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(np.diag(x3).real, [0.5773503, -0.5773503], atol=1e-7)
    np.testing.assert_allclose(x1 @ x1 + x2 @ x2 + x3 @ x3, np.eye(2), atol=1e-15)


def test_generators_n3():
    _, _, x3 = build_generators(3)
    np.testing.assert_allclose(x3, np.diag([2.0, 0.0, -2.0]) / math.sqrt(8), atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 7, 16, 33, 64, 128])
def test_fuzzy_sphere_relation(n):
    assert fuzzy_sphere_relation_residual(n) <= 1e-12


@pytest.mark.parametrize("n", [2, 5, 12, 40])
def test_su2_commutators(n):
    # rescaled spin matrices: [X_i, X_j] = i (2/sqrt(N^2-1)) eps_ijk X_k
    x1, x2, x3 = build_generators(n)
    h = 2.0 / math.sqrt(n * n - 1)
    for a, b, c in ((x1, x2, x3), (x2, x3, x1), (x3, x1, x2)):
        np.testing.assert_allclose(a @ b - b @ a, 1j * h * c, atol=1e-13)


def test_generators_are_independent_copies():
    a = build_generators(4)[0]
    a[0, 0] = 99.0
    assert build_generators(4)[0][0, 0] == 0.0


@pytest.mark.parametrize("n", [1, 0, 2.5])
def test_bad_dimension(n):
    with pytest.raises(DimensionError):
        build_generators(n)


def test_sample_points_n2():
    np.testing.assert_allclose(sample_points(2), [1 / math.sqrt(3), -1 / math.sqrt(3)])


# ---------------------------------------------------------------------------
# quantization of each representation


@pytest.mark.parametrize("n", [2, 5, 9])
def test_identity_profile_gives_x3(n):
    np.testing.assert_allclose(quantize(sigma_preset("linear"), n), build_generators(n)[2], atol=0)


@pytest.mark.parametrize("n", [2, 6])
def test_constant_profile_gives_identity(n):
    one = SigmaProfile(lambda s: np.ones_like(s), lambda s: np.zeros_like(s), "one")
    np.testing.assert_array_equal(quantize(one, n), np.eye(n))


def test_delta_phi_n3():
    q = quantize(DeltaPhi(), 3)
    np.testing.assert_allclose(q, np.full((3, 3), 1 / (2 * math.pi)))
    assert q[0, 0].real == pytest.approx(0.1591549, abs=1e-7)


def test_vortex_n4():
    np.testing.assert_array_equal(quantize(VortexPower(1), 4), np.eye(4, k=1))
    np.testing.assert_array_equal(quantize(VortexPower(-2), 4), np.eye(4, k=-2))
    np.testing.assert_array_equal(quantize(VortexPower(0), 4), np.eye(4))


def test_delta_symbols_are_tensor_operators():
    assert isinstance(quantize(DeltaFull(), 3), TensorOperator)
    assert isinstance(quantize(DeltaSigmaDiag(), 3), TensorOperator)


def test_profile_undefined_on_samples():
    bad = SigmaProfile(lambda s: np.log(s), None, "log")
    with pytest.raises(DomainError, match="log"):
        quantize(bad, 4)


def test_unsupported_representation():
    with pytest.raises(UnsupportedRepresentationError):
        quantize(object(), 3)


def _brute_force_weyl(mono, n):
    """Average over every ordering of the letters of x1^a x2^b x3^c."""
    gens = build_generators(n)
    letters = [0] * mono[0] + [1] * mono[1] + [2] * mono[2]
    perms = set(itertools.permutations(letters))
    acc = np.zeros((n, n), dtype=complex)
    for word in perms:
        m = np.eye(n, dtype=complex)
        for w in word:
            m = m @ gens[w]
        acc += m
    return acc / len(perms)


@pytest.mark.parametrize("mono", [(1, 1, 0), (2, 1, 0), (1, 1, 1), (2, 0, 2), (0, 3, 1), (1, 2, 1)])
@pytest.mark.parametrize("n", [3, 6])
def test_weyl_ordering_matches_permutation_average(mono, n):
    np.testing.assert_allclose(quantize(Polynomial({mono: 1.0}), n), _brute_force_weyl(mono, n), atol=1e-13)


@given(polynomials(), st.integers(2, 9))
def test_quantization_is_hermitian(f, n):
    q = quantize(f, n)
    np.testing.assert_allclose(q, q.conj().T, atol=1e-13)


@given(polynomials(), polynomials(), st.integers(2, 7))
def test_quantization_is_linear(f, g, n):
    np.testing.assert_allclose(quantize(2.0 * f - g, n), 2.0 * quantize(f, n) - quantize(g, n), atol=1e-12)


@given(polynomials(), st.floats(-math.pi, math.pi))
def test_rotation_covariance(f, alpha):
    n = 6
    u = rotation_unitary(n, alpha)
    np.testing.assert_allclose(quantize(rotate_z(f, alpha), n), u @ quantize(f, n) @ u.conj().T, atol=1e-12)


def test_rotate_z_advances_azimuth():
    f = X1 + 2 * X2 * X3
    alpha = 0.7
    np.testing.assert_allclose(rotate_z(f, alpha).evaluate(_S, _P), f.evaluate(_S, _P + alpha), atol=1e-13)


def test_casimir_polynomial_quantizes_to_identity():
    np.testing.assert_allclose(quantize(X1 * X1 + X2 * X2 + X3 * X3, 5), np.eye(5), atol=1e-14)


# ---------------------------------------------------------------------------
# the classical bracket


def test_bracket_examples():
    assert sphere_bracket(X1, X2) == X3
    assert sphere_bracket(X2, X3) == X1
    assert sphere_bracket(X3, X1) == X2
    assert sphere_bracket(X3, X3 * X3) == Polynomial()
    f = X1 * X2 + X3
    assert sphere_bracket(f, f) == Polynomial()


def test_bracket_matches_angular_form():
    # {f, g} = d_phi f d_sigma g - d_sigma f d_phi g, by central differences in (sigma, phi)
    f, g = X1 * X3 + X2, X2 * X2 + X1 * X3 * X3
    h = 1e-5

    def d(fun, ds, dp):
        return (fun.evaluate(_S + ds, _P + dp) - fun.evaluate(_S - ds, _P - dp)) / (2 * h)

    expected = d(f, 0, h) * d(g, h, 0) - d(f, h, 0) * d(g, 0, h)
    np.testing.assert_allclose(_on_grid(sphere_bracket(f, g)), expected, atol=1e-8)


@given(polynomials(), polynomials())
def test_bracket_antisymmetry(f, g):
    np.testing.assert_allclose(_on_grid(sphere_bracket(f, g)), -_on_grid(sphere_bracket(g, f)), atol=1e-10)


@given(polynomials(), polynomials(), polynomials(), st.integers(-3, 3))
def test_bracket_bilinear(f, g, h, a):
    lhs = _on_grid(sphere_bracket(f, a * g + h))
    rhs = a * _on_grid(sphere_bracket(f, g)) + _on_grid(sphere_bracket(f, h))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(polynomials(), polynomials(), polynomials())
def test_bracket_leibniz(f, g, h):
    lhs = _on_grid(sphere_bracket(f, g * h))
    rhs = _on_grid(sphere_bracket(f, g) * h + g * sphere_bracket(f, h))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(polynomials(max_terms=3), polynomials(max_terms=3), polynomials(max_terms=3))
def test_bracket_jacobi(f, g, h):
    total = (
        sphere_bracket(f, sphere_bracket(g, h))
        + sphere_bracket(g, sphere_bracket(h, f))
        + sphere_bracket(h, sphere_bracket(f, g))
    )
    assert np.max(np.abs(_on_grid(total)), initial=0.0) <= 1e-10 * (1 + np.max(np.abs(_on_grid(f * g * h))))


def test_profile_bracket_sign():
    # {q(sigma), g} = -q'(sigma) d_phi g
    q = sigma_preset("cubic")
    h = sphere_bracket(q, X1)
    assert isinstance(h, Pointwise)
    expected = -(1 + _S**2) * X1.d_phi().evaluate(_S, _P)
    np.testing.assert_allclose(h.evaluate(_S, _P), expected, atol=1e-14)
    np.testing.assert_allclose(sphere_bracket(X1, q).evaluate(_S, _P), -expected, atol=1e-14)


def test_profile_vortex_bracket():
    q = sigma_preset("linear")
    got = sphere_bracket(q, VortexPower(2)).evaluate(_S, _P)
    np.testing.assert_allclose(got, -2j * np.exp(2j * _P), atol=1e-14)


def test_vortex_pair_bracket_zero():
    assert sphere_bracket(VortexPower(1), VortexPower(3)) == Polynomial()


# ---------------------------------------------------------------------------
# integrals


def _moment_oracle(a, b, c):
    def integrand(phi, sigma):
        x1, x2, x3 = embed(sigma, phi)
        return float(x1**a * x2**b * x3**c)

    val, _ = dblquad(integrand, -1.0, 1.0, -math.pi, math.pi, epsabs=1e-12, epsrel=1e-12)
    return val / (2 * math.pi)


@pytest.mark.parametrize("mono", [(0, 0, 0), (2, 0, 0), (0, 0, 2), (2, 2, 0), (4, 0, 2), (1, 0, 0), (1, 1, 2), (0, 2, 4)])
def test_sphere_moments_against_quadrature(mono):
    assert sphere_moment(*mono) == pytest.approx(_moment_oracle(*mono), abs=1e-10)


def test_sphere_average_trivial_values():
    assert sphere_average(Polynomial.constant(1.0)) == pytest.approx(2.0)
    assert sphere_average(X3 * X3) == pytest.approx(2.0 / 3.0)
    assert sphere_average(sigma_preset("cubic")) == pytest.approx(0.0, abs=1e-14)
    assert sphere_average(VortexPower(0)) == 2.0
    assert sphere_average(VortexPower(3)) == 0.0


# ---------------------------------------------------------------------------
# correspondence residuals


@pytest.mark.parametrize("n", [2, 8, 32, 128])
def test_commutator_residual_generators_closed_form(n):
    _, r2, _ = correspondence_residuals(X1, X2, n)
    h = 2j / math.sqrt(n * n - 1) - 2j / n
    closed = fuzzy_norm(h * build_generators(n)[2])
    assert r2 == pytest.approx(closed, rel=1e-10)
    # the mismatch of Planck constants behaves like 1/N^3 at large N
    if n >= 8:
        assert r2 == pytest.approx(math.sqrt(2.0 / 3.0) / n**3, rel=2.0 / n**2)


@pytest.mark.parametrize("n", [2, 5, 17])
def test_commuting_diagonal_generators(n):
    r1, r2, r3 = correspondence_residuals(X3, X3, n)
    assert r2 == 0.0
    # Weyl ordering of a single generator: Q(x3^2) is exactly X3^2
    assert r1 == pytest.approx(0.0, abs=1e-14)
    assert r3 == pytest.approx(0.0, abs=1e-15)


def test_product_residual_n2_hand_value():
    # at n=2, Q(x3)^2 = 1/3 exactly
    x3 = build_generators(2)[2]
    np.testing.assert_allclose(x3 @ x3, np.eye(2) / 3, atol=1e-16)
    r1, _, _ = correspondence_residuals(X1, X2, 2)
    x1, x2, _ = build_generators(2)
    expected = fuzzy_norm(x1 @ x2 - 0.5 * (x1 @ x2 + x2 @ x1))
    assert r1 == pytest.approx(expected, rel=1e-12)
    assert r1 > 0.1


@pytest.mark.parametrize("n", [16, 64, 256])
def test_product_residual_is_first_order(n):
    r1, _, _ = correspondence_residuals(X1, X2, n)
    # Q(x1)Q(x2) - Q(x1 x2) = [X1, X2]/2 = i X3 / sqrt(N^2 - 1)
    assert r1 == pytest.approx(math.sqrt(2.0 / 3.0) / math.sqrt(n * n - 1), rel=1e-10)


@given(polynomials(), st.integers(2, 40))
def test_trace_rule_exact_up_to_degree_two(f, n):
    low = Polynomial({m: c for m, c in f.terms.items() if sum(m) <= 2})
    assert correspondence_residuals(low, low, n)[2] <= 1e-13


@pytest.mark.parametrize("n", [8, 16, 32])
def test_trace_rule_degree_four_is_second_order(n):
    r3 = correspondence_residuals(X3**4, X3, n)[2]
    exact = abs(2.0 / n * float(np.sum(sample_points(n) ** 4)) - 2.0 / 5.0)
    assert r3 == pytest.approx(exact, rel=1e-10)
    assert 0.5 / n**2 < r3 < 2.0 / n**2


def test_correspondence_preconditions():
    with pytest.raises(PreconditionError):
        correspondence_residuals(X1**5, X2, 4)
    with pytest.raises(UnsupportedRepresentationError):
        correspondence_residuals(sigma_preset("linear"), X2, 4)


# ---------------------------------------------------------------------------
# delta pairings and the vortex factorization


def test_pairing_identity_linear_profile():
    full, diag = pairing_identity_check(sigma_preset("linear"), 8)
    assert full <= 1e-13 and diag <= 1e-13


def test_pairing_identity_constant():
    one = SigmaProfile(lambda s: np.ones_like(s), None, "one")
    assert pairing_identity_check(one, 5) == (0.0, 0.0)


def test_full_delta_pairing_non_diagonal():
    assert full_delta_pairing_residual(quantize(X1, 7)) <= 1e-13
    with pytest.raises(PreconditionError):
        diagonal_delta_pairing_residual(quantize(X1, 7))


@pytest.mark.parametrize("n", [2, 3, 8, 31, 64])
def test_vortex_factorization(n):
    assert vortex_factorization_residual(n) <= 1e-12


@pytest.mark.parametrize("n", [2, 5, 20])
def test_vortex_factors_are_semidefinite_with_zero_corner(n):
    left, right = vortex_factor_diagonals(n)
    assert np.all(left > 0)
    assert np.all(right[:-1] > 0)
    assert abs(right[-1]) <= 1e-14


# ---------------------------------------------------------------------------
# points and parsing


def test_sphere_point_domain():
    p = SpherePoint(0.0, math.pi / 2)
    np.testing.assert_allclose(p.embedding, (0.0, 1.0, 0.0), atol=1e-15)
    with pytest.raises(DomainError):
        SpherePoint(1.5, 0.0)
    with pytest.raises(DomainError):
        SpherePoint(0.0, 4.0)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("x3", X3),
        ("x1*x1 + x2*x2 + x3*x3", X1 * X1 + X2 * X2 + X3 * X3),
        ("-2*x1^2*x3 + 0.5", -2 * X1**2 * X3 + 0.5),
        ("(x1 - x2)^2", (X1 - X2) ** 2),
    ],
)
def test_parse_polynomials(text, expected):
    assert parse_function(text) == expected


def test_parse_special_forms():
    assert parse_function("vortex:-2") == VortexPower(-2)
    assert parse_function("delta-phi") == DeltaPhi()
    assert parse_function("sigma-profile:arcsin").name == "arcsin"


@pytest.mark.parametrize("text, column", [("x4", 0), ("x1 +", 4), ("(x1", 3), ("x1 $ x2", 3), ("", 0)])
def test_parse_errors_report_position(text, column):
    with pytest.raises(ParseError) as info:
        parse_function(text)
    assert info.value.position == column


def test_unknown_profile_preset():
    with pytest.raises(DomainError):
        parse_function("sigma-profile:quintic")
