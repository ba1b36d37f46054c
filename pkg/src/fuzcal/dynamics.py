"""Time evolution of the N-particle Calogero model and its Lax-pair checks.

Dynamics uses the canonical bracket {q_i, p_j} = delta_ij, so

    dq_i/dt = p_i,    dp_i/dt = 2 kappa^2 sum_{k != i} (q_i - q_k)^{-3}.

The fuzzy normalization {p_i, q_j} = (N/2) delta_ij only rescales (and reverses)
time; conserved quantities are the same.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .calogero_finite import DEFAULT_GAP, PhasePoint, _inverse_differences, build_lax, check_distinct
from .errors import NearCollisionError, PreconditionError, StiffnessError


def hamiltonian(pt):
    """H = (1/2) sum p^2 + (1/2) sum_{i != j} kappa^2 / (q_i - q_j)^2."""
    check_distinct(pt)
    inv = _inverse_differences(pt.q)
    return 0.5 * float(pt.p @ pt.p) + 0.5 * pt.kappa**2 * float(np.sum(inv * inv))


def forces(q, kappa):
    inv = _inverse_differences(q)
    return 2.0 * kappa**2 * np.sum(inv**3, axis=1)


def lax_partner(pt):
    """M with M_jj = i kappa sum_{l != j} (q_j - q_l)^-2 and M_jk = -i kappa (q_j - q_k)^-2."""
    check_distinct(pt)
    inv2 = _inverse_differences(pt.q) ** 2
    m = -1j * pt.kappa * inv2
    m[np.diag_indices(pt.n)] = 1j * pt.kappa * np.sum(inv2, axis=1)
    return m


def lax_time_derivative(pt):
    """dL/dt from the chain rule along the equations of motion."""
    check_distinct(pt)
    inv = _inverse_differences(pt.q)
    dq = pt.p[:, None] - pt.p[None, :]
    dl = -1j * pt.kappa * dq * inv * inv
    dl[np.diag_indices(pt.n)] = forces(pt.q, pt.kappa)
    return dl


def lax_equation_residual(pt):
    """max-entry |dL/dt - [L, M]|."""
    lax, m = build_lax(pt), lax_partner(pt)
    return float(np.max(np.abs(lax_time_derivative(pt) - (lax @ m - m @ lax))))


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    c: float
    energy: np.ndarray
    trace_powers: dict
    eigenvalues: np.ndarray
    method: str = "rk4"
    stats: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.q.shape[1]

    def state(self, i):
        return PhasePoint(self.q[i], self.p[i], self.c)

    def __len__(self):
        return self.times.size

    def write_csv(self, fh):
        """Columns: t, q_1..q_n, p_1..p_n, H, trL2..trLK, eig_1..eig_n."""
        n = self.n
        ks = sorted(self.trace_powers)
        header = ["t"] + [f"q_{i}" for i in range(1, n + 1)] + [f"p_{i}" for i in range(1, n + 1)]
        header += ["H"] + [f"trL{k}" for k in ks] + [f"eig_{i}" for i in range(1, n + 1)]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, t in enumerate(self.times):
            row = [t, *self.q[i], *self.p[i], self.energy[i]]
            row += [self.trace_powers[k][i] for k in ks] + list(self.eigenvalues[i])
            writer.writerow([format(float(v), ".17g") for v in row])


def _rhs(y, kappa, n):
    return np.concatenate([y[n:], forces(y[:n], kappa)])


def _rk4_step(y, h, kappa, n):
    k1 = _rhs(y, kappa, n)
    k2 = _rhs(y + 0.5 * h * k1, kappa, n)
    k3 = _rhs(y + 0.5 * h * k2, kappa, n)
    k4 = _rhs(y + h * k3, kappa, n)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _min_gap(q):
    return float(np.min(np.diff(np.sort(q))))


def integrate(pt0, t_end, dt, method="rk4", rtol=1e-10, atol=1e-12, trace_powers=(2, 3, 4), eps_gap=DEFAULT_GAP, max_steps=10_000_000):
    """Integrate from t = 0 to t_end.

    ``rk4`` takes fixed steps of size ``dt`` (the last one shortened).
    ``rk4-adaptive`` uses step doubling with local Richardson extrapolation;
    ``dt`` is then the initial step and ``rtol``/``atol`` the per-step tolerance.
    """
    if dt <= 0 or t_end <= 0:
        raise PreconditionError("dt and t_end must be positive")
    if method not in ("rk4", "rk4-adaptive"):
        raise ValueError(f"unknown method {method!r}")
    check_distinct(pt0, eps_gap)
    n, kappa = pt0.n, pt0.kappa
    y = np.concatenate([pt0.q, pt0.p])
    t = 0.0
    times, states = [t], [y.copy()]
    h = dt
    rejected = 0
    h_min = 1e-14 * max(1.0, t_end)
    while t < t_end:
        if len(times) > max_steps:
            raise StiffnessError(f"exceeded {max_steps} steps at t={t}")
        h = min(h, t_end - t)
        if method == "rk4":
            y_new = _rk4_step(y, h, kappa, n)
        else:
            full = _rk4_step(y, h, kappa, n)
            half = _rk4_step(_rk4_step(y, 0.5 * h, kappa, n), 0.5 * h, kappa, n)
            err = float(np.max(np.abs(half - full) / (atol + rtol * np.maximum(np.abs(y), np.abs(half)))))
            if not np.isfinite(err) or err > 1.0:
                rejected += 1
                h *= max(0.1, 0.9 * (err ** -0.2 if np.isfinite(err) else 0.0))
                if h < h_min:
                    raise StiffnessError(f"step size underflow ({h:.3g}) at t={t}")
                continue
            y_new = half + (half - full) / 15.0
        if _min_gap(y_new[:n]) < eps_gap:
            raise NearCollisionError(
                f"particles closer than {eps_gap} near t={t + h}", PhasePoint(y[:n], y[n:], pt0.c), t
            )
        t += h
        y = y_new
        times.append(t)
        states.append(y.copy())
        if method == "rk4-adaptive":
            h *= min(4.0, 0.9 * err ** -0.2) if err > 0 else 4.0
    states = np.array(states)
    return _monitor(np.array(times), states[:, :n], states[:, n:], pt0.c, trace_powers, method, {"rejected": rejected})


def _monitor(times, q, p, c, trace_powers, method, stats):
    energy, eigs = [], []
    traces = {k: [] for k in trace_powers}
    for qi, pi in zip(q, p):
        pt = PhasePoint(qi, pi, c)
        lax = build_lax(pt)
        ev = np.linalg.eigvalsh(lax)
        eigs.append(ev)
        energy.append(hamiltonian(pt))
        for k in trace_powers:
            traces[k].append(float(np.sum(ev**k)))
    return Trajectory(
        times, q, p, c, np.array(energy), {k: np.array(v) for k, v in traces.items()}, np.array(eigs), method, stats
    )


# ---------------------------------------------------------------------------
# two-body oracle and conservation


def two_body_r_squared(pt0, times):
    """r^2(t) = r0^2 + 2 r0 r0' t + 4 E_rel t^2 for r = q1 - q2, E_rel = r0'^2/4 + kappa^2/r0^2."""
    if pt0.n != 2:
        raise PreconditionError("two-body law needs n = 2")
    r0 = pt0.q[0] - pt0.q[1]
    v0 = pt0.p[0] - pt0.p[1]
    e_rel = 0.25 * v0 * v0 + pt0.kappa**2 / (r0 * r0)
    times = np.asarray(times, dtype=float)
    return r0 * r0 + 2.0 * r0 * v0 * times + 4.0 * e_rel * times**2


def two_body_oracle_error(traj):
    """max relative deviation of the integrated r^2(t) from the analytic law."""
    exact = two_body_r_squared(traj.state(0), traj.times)
    got = (traj.q[:, 0] - traj.q[:, 1]) ** 2
    return float(np.max(np.abs(got - exact) / np.abs(exact)))


@dataclass
class ConservationReport:
    energy_drift: float
    trace_drift: dict
    eigenvalue_drift: np.ndarray
    steps: int

    @property
    def max_eigenvalue_drift(self):
        return float(np.max(self.eigenvalue_drift)) if self.eigenvalue_drift.size else 0.0

    @property
    def max_drift(self):
        return max([self.energy_drift, self.max_eigenvalue_drift, *self.trace_drift.values()])

    def as_dict(self):
        return {
            "energy_drift": self.energy_drift,
            "trace_drift": {f"trL{k}": v for k, v in sorted(self.trace_drift.items())},
            "eigenvalue_drift": [float(v) for v in self.eigenvalue_drift],
            "max_eigenvalue_drift": self.max_eigenvalue_drift,
            "steps": self.steps,
        }


def _relative_drift(series, scale):
    series = np.asarray(series, dtype=float)
    delta = float(np.max(np.abs(series - series[0])))
    return delta / scale if scale > 0 else delta


def conservation_report(traj):
    """Relative drifts along a trajectory.

    Energy is measured against |H(0)|, tr L^k against sum_i |lambda_i(0)|^k, and each
    sorted eigenvalue against the initial spectral radius.
    """
    if len(traj) == 0:
        raise PreconditionError("empty trajectory")
    ev0 = traj.eigenvalues[0]
    radius = float(np.max(np.abs(ev0)))
    traces = {k: _relative_drift(v, float(np.sum(np.abs(ev0) ** k))) for k, v in traj.trace_powers.items()}
    eig = np.array([_relative_drift(traj.eigenvalues[:, i], radius) for i in range(traj.n)])
    return ConservationReport(_relative_drift(traj.energy, abs(traj.energy[0])), traces, eig, len(traj) - 1)


def reversed_momenta(pt):
    return PhasePoint(pt.q.copy(), -pt.p, pt.c)
