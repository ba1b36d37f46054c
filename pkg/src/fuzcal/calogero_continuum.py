"""Large-N (totally classical) Calogero objects and their finite-N convergence.

The Lax function on the sphere is ``L(sigma, phi) = p(sigma) + c/(2 q'(sigma)) E(phi)``
with the sawtooth ``E(phi) = phi - pi sign(phi)`` on [-pi, pi], extended
2pi-periodically (E(0) = 0).  The r-distribution is ``delta(sigma1 - sigma2)`` times
the reduced kernel ``-(E(phi1 - phi2) + E(phi2)) / q'(sigma)``.
"""

import math
import warnings
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .calogero_finite import PhasePoint, build_lax
from .convergence import FIRST_ORDER, ConvergenceTable
from .errors import ConfigurationError, DomainError, InvariantViolation, NumericalError
from .fuzzy_sphere import SIGMA_PRESETS, sample_points

QUAD_RTOL = 1e-10


class BoundaryWarning(UserWarning):
    pass


def sawtooth(phi):
    """E(phi): phi - pi sign(phi) on [-pi, pi], 2pi-periodic, zero at 0 and +-pi."""
    phi = np.asarray(phi, dtype=float)
    wrapped = np.mod(phi + math.pi, 2.0 * math.pi) - math.pi
    out = wrapped - math.pi * np.sign(wrapped)
    return out if out.ndim else float(out)


def sawtooth_partial_sum(phi, order):
    """sum_{0 < |n| <= order} (i/n) e^{i n phi} = -2 sum_{n=1}^{order} sin(n phi)/n."""
    phi = np.asarray(phi, dtype=float)
    n = np.arange(1, order + 1)
    return -2.0 * np.sum(np.sin(np.multiply.outer(phi, n)) / n, axis=-1)


def coupling_from_a(a):
    """c = 2 sqrt(3) a / pi, matching the field-theory coupling a."""
    return 2.0 * math.sqrt(3.0) * a / math.pi


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


def _affine(s):
    return 0.5 + 0.25 * np.asarray(s, dtype=float)


MOMENTUM_PRESETS = {"zero": _zero, "affine": _affine}


@dataclass(frozen=True)
class FieldConfig:
    """Continuum phase-space point: q(sigma) with q'(sigma), p(sigma), coupling c."""

    q: Callable
    dq: Callable
    p: Callable = _zero
    c: float = 1.0
    name: str = "custom"

    @classmethod
    def preset(cls, name, c=1.0, momentum="zero"):
        """Named position profile ("linear", "cubic", "arcsin") with a momentum preset."""
        if name not in SIGMA_PRESETS:
            raise ConfigurationError(f"unknown profile {name!r}; choose from {sorted(SIGMA_PRESETS)}")
        if momentum not in MOMENTUM_PRESETS:
            raise ConfigurationError(f"unknown momentum {momentum!r}; choose from {sorted(MOMENTUM_PRESETS)}")
        q, dq = SIGMA_PRESETS[name]
        return cls(q, dq, MOMENTUM_PRESETS[momentum], c, name)

    @classmethod
    def polynomial(cls, coeffs, c=1.0, momentum="zero"):
        """q(sigma) = sum_k coeffs[k] sigma^k."""
        poly = np.polynomial.Polynomial(coeffs)
        deriv = poly.deriv()
        return cls(poly, deriv, MOMENTUM_PRESETS[momentum], c, "poly:" + ",".join(repr(float(x)) for x in coeffs))

    def with_coupling(self, c):
        return FieldConfig(self.q, self.dq, self.p, c, self.name)

    def half_slope(self, sigma):
        """c / (2 q'(sigma)); zero where q' is infinite."""
        with np.errstate(divide="ignore"):
            return self.c / (2.0 * np.asarray(self.dq(sigma), dtype=float))

    def check_monotone(self, samples=2001):
        s = np.linspace(-1.0, 1.0, samples)[1:-1]
        dq = np.asarray(self.dq(s), dtype=float)
        if not np.all(dq > 0):
            bad = s[np.flatnonzero(~(dq > 0))[0]]
            raise InvariantViolation(f"profile {self.name!r} is not increasing: q'({bad:.4g}) = {self.dq(bad)!r}")


def lax_function(cfg, sigma, phi):
    """L(sigma, phi) = p(sigma) + c/(2 q'(sigma)) E(phi)."""
    sigma = np.asarray(sigma, dtype=float)
    dq = np.asarray(cfg.dq(sigma), dtype=float)
    edge = (np.abs(sigma) == 1.0) & np.isfinite(dq)
    if np.any(edge):
        warnings.warn(
            f"profile {cfg.name!r} has finite q' at the pole; the Lax function does not extend there",
            BoundaryWarning,
            stacklevel=2,
        )
    if np.any(dq == 0):
        raise DomainError("q'(sigma) vanishes; the Lax function is undefined")
    return np.asarray(cfg.p(sigma), dtype=float) + cfg.half_slope(sigma) * sawtooth(phi)


def sampled_phase_point(cfg, n):
    """Phase point with q_j = q(sigma_j), p_j = p(sigma_j), sigma_j = (N + 1 - 2j)/sqrt(N^2 - 1)."""
    cfg.check_monotone()
    sig = sample_points(n)
    q = np.asarray(cfg.q(sig), dtype=float) * np.ones(n)
    if not np.all(np.diff(q) < 0):
        raise InvariantViolation(f"sampled positions of {cfg.name!r} are not strictly ordered")
    p = np.asarray(cfg.p(sig), dtype=float) * np.ones(n)
    return PhasePoint(q, p, cfg.c)


def _integrate(f, what):
    val, err, info = quad(f, -1.0, 1.0, epsabs=0.0, epsrel=QUAD_RTOL, limit=500, full_output=1)[:3]
    if err > max(QUAD_RTOL * abs(val), 1e-14):
        raise NumericalError(
            f"quadrature for {what} did not converge: value {val!r}, error estimate {err:.3g}, "
            f"{info['last']} subintervals"
        )
    return val


def trace_power_integral(cfg, m):
    """(1/2pi) int omega L^m = int dsigma sum_{k even} C(m,k) p^{m-k} (c/2q')^k pi^k/(k+1)."""
    if m < 1:
        raise ValueError(f"power must be >= 1, got {m}")

    def integrand(s):
        p = float(cfg.p(s))
        h = float(cfg.half_slope(s))
        return sum(comb(m, k) * p ** (m - k) * (h * math.pi) ** k / (k + 1) for k in range(0, m + 1, 2))

    return _integrate(integrand, f"trace power m={m}")


def trace_residual(cfg, m, n, target=None):
    target = trace_power_integral(cfg, m) if target is None else target
    lax = build_lax(sampled_phase_point(cfg, n))
    return abs(2.0 / n * np.trace(np.linalg.matrix_power(lax, m)).real - target)


def trace_convergence(cfg, m, sizes):
    """|(2/N) tr L(N)^m - (1/2pi) int omega L^m| for each N in sizes."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    target = trace_power_integral(cfg, m)
    res = [trace_residual(cfg, m, n, target) for n in sizes]
    return ConvergenceTable(f"trace-power[m={m},profile={cfg.name}]", sizes, res, FIRST_ORDER)


def offdiagonal_residual(cfg, band, n, margin=0.1):
    """max over interior rows j of |L(N)_{j,j+k} - i c / (2 q'(sigma_j) k)|."""
    if band == 0 or abs(band) >= n:
        raise ValueError(f"band {band} out of range for n={n}")
    lax = build_lax(sampled_phase_point(cfg, n))
    sig = sample_points(n)
    lo = int(math.ceil(margin * n))
    rows = np.arange(lo, n - lo)
    rows = rows[(rows + band >= 0) & (rows + band < n)]
    if rows.size == 0:
        raise ValueError(f"no interior rows left for n={n}, band={band}")
    target = 1j * cfg.half_slope(sig[rows]) / band
    return float(np.max(np.abs(lax[rows, rows + band] - target)))


def offdiagonal_fourier_convergence(cfg, band, sizes, margin=0.1):
    sizes = list(sizes)
    res = [offdiagonal_residual(cfg, band, n, margin) for n in sizes]
    return ConvergenceTable(f"offdiag-fourier[k={band},profile={cfg.name}]", sizes, res, FIRST_ORDER)


def continuum_energy(cfg, a):
    """H = (1/2) int (p^2 + a^2 / q'^2) d sigma."""

    def integrand(s):
        dq = float(cfg.dq(s))
        return float(cfg.p(s)) ** 2 + (a / dq) ** 2

    return 0.5 * _integrate(integrand, "continuum energy")


# ---------------------------------------------------------------------------
# r-distribution


def r_kernel(cfg, sigma, phi1, phi2):
    """Reduced kernel -(E(phi1 - phi2) + E(phi2)) / q'(sigma)."""
    dq = np.asarray(cfg.dq(sigma), dtype=float)
    return -(sawtooth(np.asarray(phi1) - np.asarray(phi2)) + sawtooth(phi2)) / dq


def _kernel_fourier(cfg, sigma, n_max, nodes=48):
    """Fourier coefficients c[n, m] of the kernel, |n|, |m| <= n_max.

    The kernel is linear on the four pieces cut out by phi2 = 0 and phi1 = phi2,
    so Gauss-Legendre on each piece is exact up to rounding.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    modes = np.arange(-n_max, n_max + 1)
    coeff = np.zeros((modes.size, modes.size), dtype=complex)
    for a, b in ((-math.pi, 0.0), (0.0, math.pi)):
        phi2 = 0.5 * (b - a) * x + 0.5 * (a + b)
        w2 = 0.5 * (b - a) * w
        for lower in (True, False):
            lo = np.full_like(phi2, -math.pi) if lower else phi2
            hi = phi2 if lower else np.full_like(phi2, math.pi)
            phi1 = 0.5 * (hi - lo)[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]
            w1 = 0.5 * (hi - lo)[:, None] * w[None, :]
            # one-sided evaluation inside the piece avoids the jump values
            p2 = np.broadcast_to(phi2[:, None], phi1.shape)
            vals = r_kernel(cfg, sigma, phi1, p2) * w1 * w2[:, None]
            e1 = np.exp(-1j * np.multiply.outer(modes, phi1))
            e2 = np.exp(-1j * np.multiply.outer(modes, p2))
            coeff += np.einsum("nij,mij,ij->nm", e1, e2, vals)
    return modes, coeff / (4.0 * math.pi**2)


@dataclass
class RDistributionReport:
    derivative_phi1: float
    derivative_phi2: float
    jump_diagonal: float
    jump_origin: float
    smeared_phi1: float
    smeared_phi2: float
    points: int

    def as_dict(self):
        return dict(self.__dict__)

    def passed(self, pointwise_tol=1e-6, jump_tol=1e-6, smeared_tol=1e-10):
        return (
            max(self.derivative_phi1, self.derivative_phi2) <= pointwise_tol
            and max(self.jump_diagonal, self.jump_origin) <= jump_tol
            and max(self.smeared_phi1, self.smeared_phi2) <= smeared_tol
        )


def r_distribution_checks(cfg, grid=16, n_max=4, step=1e-5, side=1e-10):
    """Check the reduced r kernel against the first-order conditions it must solve.

    (a) away from phi1 = phi2 and phi2 = 0: -q' d_phi1 r = 1 and d_phi2 r = 0
        (central differences, reported as |-q' d_phi1 r - 1| and |q' d_phi2 r|);
    (b) the jumps across phi1 = phi2 (in phi1) and across phi2 = 0 (in phi2) are
        both +2pi/q', reported as relative errors;
    (c) Fourier coefficients of -q' d_phi1 r and -q' d_phi2 r equal those of
        1 - 2pi delta(phi1 - phi2) and 2pi(delta(phi1 - phi2) - delta(phi2)).
    """
    if grid < 8:
        raise ConfigurationError(f"grid of {grid} points cannot isolate the discontinuity lines; need >= 8")
    cfg.check_monotone()
    sig = np.linspace(-1.0, 1.0, grid + 2)[1:-1]
    # offset so grid points avoid phi = 0 and the diagonal
    phis = -math.pi + (np.arange(grid) + 0.5 + 1.0 / (3 * grid)) * 2.0 * math.pi / grid
    s, p1, p2 = np.meshgrid(sig, phis, phis * 0.97, indexing="ij")
    margin = 10 * step

    def dist(x):
        return np.abs(np.mod(x + math.pi, 2 * math.pi) - math.pi)

    away = (dist(p1 - p2) > margin) & (dist(p2) > margin)
    s, p1, p2 = s[away], p1[away], p2[away]
    dq = np.asarray(cfg.dq(s), dtype=float)
    d1 = (r_kernel(cfg, s, p1 + step, p2) - r_kernel(cfg, s, p1 - step, p2)) / (2 * step)
    d2 = (r_kernel(cfg, s, p1, p2 + step) - r_kernel(cfg, s, p1, p2 - step)) / (2 * step)
    deriv1 = float(np.max(np.abs(-dq * d1 - 1.0)))
    deriv2 = float(np.max(np.abs(dq * d2)))

    sj, ph = np.meshgrid(sig, phis[np.abs(phis) > margin], indexing="ij")
    expected = 2.0 * math.pi / np.asarray(cfg.dq(sj), dtype=float)
    jump_diag = r_kernel(cfg, sj, ph + side, ph) - r_kernel(cfg, sj, ph - side, ph)
    jump_orig = r_kernel(cfg, sj, ph, side) - r_kernel(cfg, sj, ph, -side)
    jd = float(np.max(np.abs(jump_diag / expected - 1.0)))
    jo = float(np.max(np.abs(jump_orig / expected - 1.0)))

    sm1 = sm2 = 0.0
    for sigma in sig[:: max(1, sig.size // 4)]:
        dq0 = float(cfg.dq(sigma))
        modes, coeff = _kernel_fourier(cfg, sigma, n_max)
        nn, mm = np.meshgrid(modes, modes, indexing="ij")
        got1 = -dq0 * 1j * nn * coeff
        got2 = -dq0 * 1j * mm * coeff
        want1 = ((nn == 0) & (mm == 0)).astype(float) - (nn + mm == 0)
        want2 = (nn + mm == 0).astype(float) - (nn == 0)
        sm1 = max(sm1, float(np.max(np.abs(got1 - want1))))
        sm2 = max(sm2, float(np.max(np.abs(got2 - want2))))
    return RDistributionReport(deriv1, deriv2, jd, jo, sm1, sm2, int(s.size))
