"""The N-particle Calogero model as a fuzzy-sphere object.

Phase space coordinates carry the bracket ``{p_i, q_j} = (N/2) delta_ij`` and the
coupling ``kappa = c/N``.  Observables carry analytic partial derivatives, and a
:class:`PoissonEngine` combines them; everything here is an exact identity checked
to rounding.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    PreconditionError,
    ResourceLimitError,
    SingularConfigurationError,
    UnsupportedObservableError,
)
from .fuzzy_sphere import (
    DeltaFull,
    DeltaSigmaDiag,
    all_ones,
    max_norm,
    quantize,
    sample_points,
)
from .tensor import (
    MAX_TENSOR_N,
    TensorOperator,
    anticommutator,
    commutator,
    diagonal_coincidence,
    slot1,
    slot2,
    transposition,
)

DEFAULT_GAP = 1e-8


@dataclass(frozen=True, eq=False)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.ndim != 1 or q.shape != p.shape:
            raise ValueError(f"q and p must be 1-d of equal length, got {q.shape} and {p.shape}")
        if q.size < 2:
            raise PreconditionError(f"need at least 2 particles, got {q.size}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.q.size

    @property
    def kappa(self):
        return self.c / self.n

    def replace(self, q=None, p=None, c=None):
        return PhasePoint(self.q if q is None else q, self.p if p is None else p, self.c if c is None else c)


def check_distinct(pt, eps_gap=DEFAULT_GAP):
    """Raise SingularConfigurationError when two positions are closer than eps_gap."""
    order = np.argsort(pt.q, kind="stable")
    gaps = np.diff(pt.q[order])
    if gaps.size and gaps.min() <= eps_gap:
        k = int(np.argmin(gaps))
        i, j = sorted((int(order[k]), int(order[k + 1])))
        raise SingularConfigurationError(
            f"particles {i} and {j} coincide (q={pt.q[i]!r}, {pt.q[j]!r}, gap {gaps[k]:.3g})", (i, j)
        )


def random_phase_point(n, rng, c=1.0):
    """Random point with sorted q in [-1, 1] and standard-normal p.

    Consecutive positions are at least ``min(10/n^2, 1/n)`` apart; the sample is
    drawn uniformly from that constrained set by shifting sorted uniforms.
    """
    if n < 2:
        raise PreconditionError(f"need at least 2 particles, got {n}")
    gap = min(10.0 / n**2, 1.0 / n)
    span = 2.0 - (n - 1) * gap
    u = np.sort(rng.uniform(0.0, span, size=n))
    q = -1.0 + u + gap * np.arange(n)
    p = rng.standard_normal(n)
    return PhasePoint(q, p, c)


def _inverse_differences(q):
    d = q[:, None] - q[None, :]
    np.fill_diagonal(d, 1.0)
    inv = 1.0 / d
    np.fill_diagonal(inv, 0.0)
    return inv


def build_lax(pt):
    """L_ij = p_i delta_ij + (1 - delta_ij) i kappa / (q_i - q_j)."""
    check_distinct(pt)
    lax = 1j * pt.kappa * _inverse_differences(pt.q)
    lax[np.diag_indices(pt.n)] = pt.p
    return lax


def build_position_matrices(pt):
    """R = diag(q), P = diag(p)."""
    return np.diag(pt.q).astype(complex), np.diag(pt.p).astype(complex)


def commutator_identity_residual(pt):
    """Max-entry residual of [R, L] = i kappa (K - 1)."""
    lax = build_lax(pt)
    # R is diagonal, so [R, L]_ij = (q_i - q_j) L_ij
    lhs = (pt.q[:, None] - pt.q[None, :]) * lax
    rhs = 1j * pt.kappa * (all_ones(pt.n) - np.eye(pt.n))
    return max_norm(lhs - rhs)


def build_r_matrix(pt):
    """r_12 = sum_{k!=l} i/(q_l - q_k) [E_kl (x) E_lk + (1/2) E_kk (x) (E_kl - E_lk)].

    Returns ``(r12, r21)``.
    """
    check_distinct(pt)
    n = pt.n
    _guard(n)
    # w[k, l] = i / (q_l - q_k)
    w = -1j * _inverse_differences(pt.q)
    comp = np.zeros((n, n, n, n), dtype=complex)
    k, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    comp[k, l, l, k] += w
    comp[k, k, k, l] += 0.5 * w
    comp[k, k, l, k] -= 0.5 * w
    r12 = TensorOperator.from_components(comp)
    return r12, r12.swap()


def _guard(n):
    if n > MAX_TENSOR_N:
        raise ResourceLimitError(f"tensor operations limited to n <= {MAX_TENSOR_N}, got {n}")


# ---------------------------------------------------------------------------
# observables and the bracket


@dataclass(frozen=True)
class Observable:
    """A phase-space function with analytic partials.

    ``grad_q(pt)`` and ``grad_p(pt)`` return arrays of shape ``(n,) + value_shape``.
    """

    name: str
    value: Callable
    grad_q: Callable = None
    grad_p: Callable = None

    def __mul__(self, other):
        if not isinstance(other, Observable):
            return NotImplemented
        a, b = self, other

        def value(pt):
            return a.value(pt) * b.value(pt)

        def gq(pt):
            return a.grad_q(pt) * b.value(pt) + a.value(pt) * b.grad_q(pt)

        def gp(pt):
            return a.grad_p(pt) * b.value(pt) + a.value(pt) * b.grad_p(pt)

        return Observable(f"({a.name})*({b.name})", value, gq, gp)


def position(i):
    def grad(pt):
        g = np.zeros(pt.n)
        g[i] = 1.0
        return g

    return Observable(f"q{i}", lambda pt: pt.q[i], grad, lambda pt: np.zeros(pt.n))


def momentum(i):
    def grad(pt):
        g = np.zeros(pt.n)
        g[i] = 1.0
        return g

    return Observable(f"p{i}", lambda pt: pt.p[i], lambda pt: np.zeros(pt.n), grad)


def _lax_q_derivative_weights(pt):
    """D_kl = dL_kl/dq_k = -i kappa / (q_k - q_l)^2 (zero on the diagonal)."""
    inv = _inverse_differences(pt.q)
    return -1j * pt.kappa * inv * inv


def _lax_grad_q(pt):
    n = pt.n
    d = _lax_q_derivative_weights(pt)
    g = np.zeros((n, n, n), dtype=complex)
    idx = np.arange(n)
    g[idx, idx, :] += d
    g[idx, :, idx] -= d.T
    return g


def _lax_grad_p(pt):
    n = pt.n
    g = np.zeros((n, n, n), dtype=complex)
    idx = np.arange(n)
    g[idx, idx, idx] = 1.0
    return g


def lax_observable():
    """The whole Lax matrix as a matrix-valued observable."""
    return Observable("L", build_lax, _lax_grad_q, _lax_grad_p)


def lax_entry(k, l):
    return Observable(
        f"L[{k},{l}]",
        lambda pt: build_lax(pt)[k, l],
        lambda pt: _lax_grad_q(pt)[:, k, l],
        lambda pt: _lax_grad_p(pt)[:, k, l],
    )


def trace_power(m):
    """tr L^m with d/dp_i = m (L^{m-1})_ii and d/dq_i = m [D, L^{m-1}]_ii."""

    def value(pt):
        return float(np.trace(np.linalg.matrix_power(build_lax(pt), m)).real)

    def gq(pt):
        lm1 = np.linalg.matrix_power(build_lax(pt), m - 1)
        d = _lax_q_derivative_weights(pt)
        return m * np.diagonal(d @ lm1 - lm1 @ d).real

    def gp(pt):
        lm1 = np.linalg.matrix_power(build_lax(pt), m - 1)
        return m * np.diagonal(lm1).real

    return Observable(f"trL^{m}", value, gq, gp)


def hamiltonian_observable():
    """H = (1/2) sum p^2 + sum_{i<j} kappa^2 / (q_i - q_j)^2."""

    def value(pt):
        inv = _inverse_differences(pt.q)
        return 0.5 * float(pt.p @ pt.p) + 0.5 * pt.kappa**2 * float(np.sum(inv * inv))

    def gq(pt):
        inv = _inverse_differences(pt.q)
        return -2.0 * pt.kappa**2 * np.sum(inv**3, axis=1)

    return Observable("H", value, gq, lambda pt: pt.p.copy())


def fuzzy_pairing_observable(profile):
    """(2/N) tr(Q_N(T) R) for a sigma profile T, i.e. (2/N) sum T(sigma_j) q_j."""

    def weights(pt):
        return 2.0 / pt.n * np.real(np.diagonal(quantize(profile, pt.n)))

    return Observable(
        f"(2/N)tr(Q({profile.name})R)",
        lambda pt: float(weights(pt) @ pt.q),
        weights,
        lambda pt: np.zeros(pt.n),
    )


class PoissonEngine:
    """{A, B} = scale * sum_i (dA/dp_i dB/dq_i - dA/dq_i dB/dp_i).

    ``scale = N/2`` reproduces the fuzzy normalization; ``scale = 1`` is the
    canonical one.  Matrix-valued pairs return a :class:`TensorOperator` whose
    (ij, kl) component is {A_ij, B_kl}.
    """

    def __init__(self, scale):
        self.scale = scale

    @classmethod
    def fuzzy(cls, n):
        return cls(n / 2.0)

    def partials(self, obs, pt):
        if not isinstance(obs, Observable) or obs.grad_q is None or obs.grad_p is None:
            name = getattr(obs, "name", type(obs).__name__)
            raise UnsupportedObservableError(f"observable {name!r} has no registered partials")
        return np.asarray(obs.grad_q(pt)), np.asarray(obs.grad_p(pt))

    def bracket(self, a, b, pt):
        aq, ap = self.partials(a, pt)
        bq, bp = self.partials(b, pt)
        out = self.scale * (np.tensordot(ap, bq, axes=(0, 0)) - np.tensordot(aq, bp, axes=(0, 0)))
        if out.ndim == 4:
            return TensorOperator.from_components(out)
        return out[()] if out.ndim == 0 else out

    def bracket_scale(self, a, b, pt):
        """sum of |terms| in the bracket; the rounding reference for cancellations."""
        aq, ap = self.partials(a, pt)
        bq, bp = self.partials(b, pt)
        terms = np.abs(np.tensordot(np.abs(ap), np.abs(bq), axes=(0, 0))) + np.abs(
            np.tensordot(np.abs(aq), np.abs(bp), axes=(0, 0))
        )
        return abs(self.scale) * terms


def finite_difference_partials(obs, pt, step=1e-5):
    """Central-difference (grad_q, grad_p) of an observable."""
    gq, gp = [], []
    for which, out in (("q", gq), ("p", gp)):
        base = getattr(pt, which)
        for i in range(pt.n):
            plus, minus = base.copy(), base.copy()
            plus[i] += step
            minus[i] -= step
            fp = np.asarray(obs.value(pt.replace(**{which: plus})))
            fm = np.asarray(obs.value(pt.replace(**{which: minus})))
            out.append((fp - fm) / (2.0 * step))
    return np.array(gq), np.array(gp)


def partials_relative_error(obs, pt, step=1e-5):
    """max |analytic - finite difference| / max |analytic| over both gradients."""
    aq, ap = np.asarray(obs.grad_q(pt)), np.asarray(obs.grad_p(pt))
    fq, fp = finite_difference_partials(obs, pt, step)
    scale = max(np.max(np.abs(aq)), np.max(np.abs(ap)), np.finfo(float).tiny)
    return float(max(np.max(np.abs(aq - fq)), np.max(np.abs(ap - fp))) / scale)


def poisson_bracket(a, b, pt, engine=None):
    engine = engine or PoissonEngine.fuzzy(pt.n)
    return engine.bracket(a, b, pt)


# ---------------------------------------------------------------------------
# exact identities


def fundamental_relation_residual(pt):
    """Max-entry residual of {L_1, L_2} = -(iN/2)[r_12, L_1] + (iN/2)[r_21, L_2]."""
    n = pt.n
    _guard(n)
    lax = build_lax(pt)
    r12, r21 = build_r_matrix(pt)
    lhs = PoissonEngine.fuzzy(n).bracket(lax_observable(), lax_observable(), pt)
    l1, l2 = slot1(lax), slot2(lax)
    rhs = commutator(r12, l1) * (-0.5j * n) + commutator(r21, l2) * (0.5j * n)
    return (lhs - rhs).max_abs()


def r_commutator_identities_residual(pt):
    """Max-entry residuals of the two [R (x) 1, r] and [1 (x) R, r] identities.

    [R_1, r_12] = -i sum_{k!=l} E_kl (x) E_lk
    [R_2, r_12] = i sum_{k,l} E_kl (x) E_lk - (i/2) [sum_m E_mm (x) E_mm, 1 (x) K]_+
    """
    n = pt.n
    r12, _ = build_r_matrix(pt)
    r, _ = build_position_matrices(pt)
    swap, coincide = transposition(n), diagonal_coincidence(n)
    rhs1 = (swap - coincide) * -1j
    rhs2 = swap * 1j - anticommutator(coincide, slot2(all_ones(n))) * 0.5j
    res1 = (commutator(slot1(r), r12) - rhs1).max_abs()
    res2 = (commutator(slot2(r), r12) - rhs2).max_abs()
    return res1, res2


def fuzzy_rewritten_r_identities(n):
    """Right-hand sides of the [R, r] identities rebuilt from quantized deltas.

    Returns ``(rhs1, rhs2)`` computed as
    ``-(2i/N) Q(2pi delta delta - delta_sigma)`` and
    ``(2i/N) Q(2pi delta delta) - (i/N) [Q(delta_sigma), 1 (x) Q(2pi delta_phi)]_+``.
    """
    q_full = quantize(DeltaFull(), n)
    q_diag = quantize(DeltaSigmaDiag(), n)
    from .fuzzy_sphere import DeltaPhi

    q_dphi2 = slot2(quantize(DeltaPhi(), n) * (2.0 * math.pi))
    rhs1 = (q_full * (2.0 * math.pi) - q_diag) * (-2j / n)
    rhs2 = q_full * (2.0 * math.pi) * (2j / n) - anticommutator(q_diag, q_dphi2) * (1j / n)
    return rhs1, rhs2


def fuzzy_rewritten_residual(pt):
    """Max-entry residuals of [R_1, r] and [R_2, r] against the quantized-delta forms."""
    r12, _ = build_r_matrix(pt)
    r, _ = build_position_matrices(pt)
    rhs1, rhs2 = fuzzy_rewritten_r_identities(pt.n)
    return (commutator(slot1(r), r12) - rhs1).max_abs(), (commutator(slot2(r), r12) - rhs2).max_abs()


MAX_TRACE_POWER = 8


def involutivity_residual(pt, m, k, engine=None, max_power=MAX_TRACE_POWER):
    """|{tr L^m, tr L^k}| relative to the summed magnitude of its terms."""
    for e in (m, k):
        if not 1 <= e <= max_power:
            raise PreconditionError(f"trace power {e} outside [1, {max_power}]")
    check_distinct(pt)
    engine = engine or PoissonEngine.fuzzy(pt.n)
    a, b = trace_power(m), trace_power(k)
    value = abs(engine.bracket(a, b, pt))
    scale = float(engine.bracket_scale(a, b, pt))
    if scale == 0.0:
        return 0.0
    return float(value / scale)


def discretized_pairing_residual(pt, profile):
    """max_i |{p_i, (2/N) tr(Q(T) R)} - T(sigma_i)| with the fuzzy bracket."""
    engine = PoissonEngine.fuzzy(pt.n)
    target = np.real(profile.evaluate(sample_points(pt.n)))
    obs = fuzzy_pairing_observable(profile)
    got = np.array([engine.bracket(momentum(i), obs, pt) for i in range(pt.n)])
    return float(np.max(np.abs(got - target)))
