import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzcal.calogero_finite import PhasePoint, build_lax, random_phase_point
from fuzcal.dynamics import (
    conservation_report,
    hamiltonian,
    integrate,
    lax_equation_residual,
    lax_partner,
    lax_time_derivative,
    reversed_momenta,
    two_body_oracle_error,
    two_body_r_squared,
)
from fuzcal.errors import NearCollisionError, PreconditionError, SingularConfigurationError


def _point(n, seed, c=1.0):
    return random_phase_point(n, np.random.default_rng(seed), c)


def test_hamiltonian_examples():
    assert hamiltonian(PhasePoint([0.0, 1.0], [1.0, 2.0], 0.0)) == 2.5
    pt = PhasePoint([1.0, -1.0], [0.0, 0.0], 1.0)
    assert hamiltonian(pt) == pytest.approx(0.0625, abs=1e-16)
    lax = build_lax(pt)
    assert 0.5 * np.trace(lax @ lax).real == pytest.approx(0.0625, abs=1e-16)


@given(st.integers(2, 16), st.integers(0, 2**32 - 1))
def test_hamiltonian_is_half_trace_square(n, seed):
    pt = _point(n, seed)
    lax = build_lax(pt)
    assert hamiltonian(pt) == pytest.approx(0.5 * np.trace(lax @ lax).real, rel=1e-12)


def test_lax_pair_hand_value():
    pt = PhasePoint([1.0, -1.0], [0.0, 0.0], 1.0)
    lax, m = build_lax(pt), lax_partner(pt)
    comm = lax @ m - m @ lax
    np.testing.assert_allclose(np.diag(comm).real, [1 / 16, -1 / 16], atol=1e-16)
    np.testing.assert_allclose(np.diag(lax_time_derivative(pt)), [1 / 16, -1 / 16], atol=1e-16)
    assert lax_equation_residual(pt) <= 1e-16


def test_lax_pair_free():
    pt = _point(5, 2, c=0.0)
    np.testing.assert_array_equal(lax_time_derivative(pt), 0)
    assert lax_equation_residual(pt) == 0.0


@settings(max_examples=100)
@given(st.integers(2, 32), st.integers(0, 2**32 - 1))
def test_lax_equation_scaled(n, seed):
    # rounding scales with the entries of |L||M|; the absolute floor 1e-12 applies for small N
    pt = _point(n, seed)
    scale = max(1.0, float(np.max(np.abs(build_lax(pt)) @ np.abs(lax_partner(pt)))))
    assert lax_equation_residual(pt) <= 1e-12 * scale


def test_lax_equation_n8_absolute():
    rng = np.random.default_rng(8)
    assert max(lax_equation_residual(random_phase_point(8, rng)) for _ in range(100)) <= 1e-12


# ---------------------------------------------------------------------------
# integrators


@pytest.mark.parametrize("method", ["rk4", "rk4-adaptive"])
def test_free_flight_exact(method):
    pt = PhasePoint([-0.5, 0.1, 0.7], [-0.3, 0.02, 0.25], 0.0)
    traj = integrate(pt, 2.0, 0.1, method=method)
    np.testing.assert_allclose(traj.q[-1], pt.q + 2.0 * pt.p, atol=1e-13)
    np.testing.assert_array_equal(traj.p[-1], pt.p)
    report = conservation_report(traj)
    assert report.max_drift == 0.0


@pytest.mark.parametrize("method, dt, tol", [("rk4", 1e-3, 1e-6), ("rk4-adaptive", 1e-2, 1e-8)])
def test_two_body_oracle(method, dt, tol):
    pt = _point(2, 11)
    traj = integrate(pt, 10.0, dt, method=method)
    assert two_body_oracle_error(traj) <= tol


def test_two_body_law_derivatives():
    # d^2(r^2)/dt^2 = 8 E_rel for an inverse-square pair potential
    pt = PhasePoint([0.4, -0.3], [0.2, 0.5], 1.3)
    t = np.array([0.0, 1.0, 2.0])
    r2 = two_body_r_squared(pt, t)
    e_rel = 0.25 * (0.2 - 0.5) ** 2 + (1.3 / 2) ** 2 / 0.7**2
    assert r2[0] - 2 * r2[1] + r2[2] == pytest.approx(8 * e_rel)
    with pytest.raises(PreconditionError):
        two_body_r_squared(_point(3, 0), t)


def test_rk4_is_fourth_order():
    pt = _point(2, 3)
    errs = [two_body_oracle_error(integrate(pt, 2.0, dt)) for dt in (0.1, 0.05, 0.025)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)


def test_time_reversal():
    pt = _point(4, 21)
    fwd = integrate(pt, 3.0, 0.01, method="rk4-adaptive")
    back = integrate(reversed_momenta(fwd.state(-1)), 3.0, 0.01, method="rk4-adaptive")
    end = back.state(-1)
    np.testing.assert_allclose(end.q, pt.q, atol=1e-8)
    np.testing.assert_allclose(-end.p, pt.p, atol=1e-8)


def test_two_body_scattering_momenta_are_eigenvalues():
    pt = PhasePoint([0.2, -0.2], [-0.3, 0.4], 1.0)
    ev0 = np.linalg.eigvalsh(build_lax(pt))
    traj = integrate(pt, 2000.0, 0.05, method="rk4-adaptive")
    np.testing.assert_allclose(np.sort(traj.p[-1]), ev0, atol=1e-4)


def test_symmetric_pair_keeps_zero_total_momentum():
    pt = PhasePoint([0.3, -0.3], [0.7, -0.7], 1.0)
    traj = integrate(pt, 5.0, 0.01)
    assert np.max(np.abs(traj.p.sum(axis=1))) <= 1e-13


def test_conservation_n8():
    traj = integrate(_point(8, 7), 10.0, 0.01, method="rk4-adaptive")
    report = conservation_report(traj)
    assert report.energy_drift <= 1e-8
    assert max(report.trace_drift.values()) <= 1e-8
    assert report.max_eigenvalue_drift <= 1e-8


def test_near_collision_raises():
    # head-on pair with weak repulsion comes closer than the guard
    pt = PhasePoint([0.5, -0.5], [-5.0, 5.0], 1e-12)
    with pytest.raises(NearCollisionError) as info:
        integrate(pt, 1.0, 1e-3, eps_gap=1e-3)
    assert info.value.time > 0.0
    assert info.value.last_state.n == 2


def test_integrate_preconditions():
    pt = _point(3, 0)
    with pytest.raises(PreconditionError):
        integrate(pt, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(pt, 1.0, 0.1, method="euler")
    with pytest.raises(SingularConfigurationError):
        integrate(PhasePoint([0.1, 0.1], [0.0, 0.0]), 1.0, 0.1)


def test_trajectory_csv_columns():
    traj = integrate(_point(3, 1), 0.05, 0.01)
    buf = io.StringIO()
    traj.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,q_1,q_2,q_3,p_1,p_2,p_3,H,trL2,trL3,trL4,eig_1,eig_2,eig_3"
    assert len(lines) == len(traj) + 1
    assert float(lines[1].split(",")[1]) == traj.q[0, 0]
