"""Fuzzy-sphere quantization of the sphere functions used by the Calogero model.

Sphere coordinates: ``x1 = sqrt(1 - sigma^2) cos(phi)``, ``x2 = sqrt(1 - sigma^2) sin(phi)``,
``x3 = sigma`` with ``sigma`` in [-1, 1] and ``phi`` in [-pi, pi]; the symplectic
(area) form is ``d sigma ^ d phi`` and the bracket is oriented so that
``{x1, x2} = x3``.  The Planck parameter of the N x N fuzzy sphere is 2/N.

Fuzzy matrices are plain complex ``numpy`` arrays; the singular symbols on the
product of two spheres quantize to :class:`~fuzcal.tensor.TensorOperator`.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    ParseError,
    PreconditionError,
    UnsupportedRepresentationError,
)
from .tensor import TensorOperator, diagonal_coincidence, slot2, transposition

# ---------------------------------------------------------------------------
# points and functions on the sphere


@dataclass(frozen=True)
class SpherePoint:
    sigma: float
    phi: float

    def __post_init__(self):
        if not -1.0 <= self.sigma <= 1.0:
            raise DomainError(f"sigma={self.sigma} outside [-1, 1]")
        if not -math.pi <= self.phi <= math.pi:
            raise DomainError(f"phi={self.phi} outside [-pi, pi]")

    @property
    def embedding(self):
        return embed(self.sigma, self.phi)


def embed(sigma, phi):
    """Cartesian coordinates (x1, x2, x3) of the sphere point(s) (sigma, phi)."""
    sigma = np.asarray(sigma, dtype=float)
    rho = np.sqrt(np.clip(1.0 - sigma * sigma, 0.0, None))
    return rho * np.cos(phi), rho * np.sin(phi), sigma


class Polynomial:
    """Polynomial in the ambient coordinates x1, x2, x3 with complex coefficients.

    Terms are kept as ``{(a, b, c): coeff}`` for ``coeff * x1^a x2^b x3^c``.
    Equality is as ambient polynomials, not as functions restricted to the sphere.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping = ()):
        clean = {}
        for mono, coeff in dict(terms).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != 3 or min(mono) < 0:
                raise ValueError(f"bad monomial exponent {mono}")
            if coeff != 0:
                clean[mono] = clean.get(mono, 0) + complex(coeff)
        self.terms = {m: c for m, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, value):
        return cls({(0, 0, 0): value})

    @classmethod
    def coordinate(cls, i):
        """The coordinate function x_i, i in {1, 2, 3}."""
        mono = [0, 0, 0]
        mono[i - 1] = 1
        return cls({tuple(mono): 1.0})

    @property
    def degree(self):
        return max((sum(m) for m in self.terms), default=0)

    def is_real(self):
        return all(abs(c.imag) == 0.0 for c in self.terms.values())

    def __repr__(self):
        return f"Polynomial({self.terms!r})"

    def __eq__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(other)
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return Polynomial({m: c * other for m, c in self.terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = (m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Polynomial.constant(1.0)
        for _ in range(k):
            out = out * self
        return out

    def derivative(self, i):
        """Ambient partial derivative d/dx_i."""
        out = {}
        for m, c in self.terms.items():
            e = m[i - 1]
            if e:
                dm = list(m)
                dm[i - 1] -= 1
                out[tuple(dm)] = out.get(tuple(dm), 0) + c * e
        return Polynomial(out)

    def d_phi(self):
        """Derivative along the azimuth: x1 d/dx2 - x2 d/dx1."""
        x1, x2 = Polynomial.coordinate(1), Polynomial.coordinate(2)
        return x1 * self.derivative(2) - x2 * self.derivative(1)

    def compose_linear(self, matrix):
        """Return ``x -> self(matrix @ x)``."""
        matrix = np.asarray(matrix, dtype=float)
        lin = [
            Polynomial({(1, 0, 0): matrix[r, 0], (0, 1, 0): matrix[r, 1], (0, 0, 1): matrix[r, 2]})
            for r in range(3)
        ]
        out = Polynomial()
        for (a, b, c), coeff in self.terms.items():
            out = out + coeff * (lin[0] ** a) * (lin[1] ** b) * (lin[2] ** c)
        return out

    def evaluate_cartesian(self, x1, x2, x3):
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
        out = np.zeros(x1.shape, dtype=complex)
        for (a, b, c), coeff in self.terms.items():
            out = out + coeff * x1**a * x2**b * x3**c
        return out

    def evaluate(self, sigma, phi):
        return self.evaluate_cartesian(*embed(sigma, phi))


@dataclass(frozen=True)
class SigmaProfile:
    """A phi-independent function f(sigma) with its derivative."""

    f: Callable
    df: Callable = None
    name: str = "profile"

    def evaluate(self, sigma, phi=0.0):
        sigma, _ = np.broadcast_arrays(np.asarray(sigma, dtype=float), np.asarray(phi, dtype=float))
        return np.asarray(self.f(sigma), dtype=complex)


@dataclass(frozen=True)
class VortexPower:
    """The vortex configuration e^{i k phi}."""

    k: int

    def evaluate(self, sigma, phi):
        sigma, phi = np.broadcast_arrays(np.asarray(sigma, dtype=float), np.asarray(phi, dtype=float))
        return np.exp(1j * self.k * phi)


@dataclass(frozen=True)
class DeltaPhi:
    """delta(phi) on the sphere."""


@dataclass(frozen=True)
class DeltaSigmaDiag:
    """delta(sigma1 - sigma2) on the product of two spheres."""


@dataclass(frozen=True)
class DeltaFull:
    """delta(sigma1 - sigma2) delta(phi1 - phi2) on the product of two spheres."""


@dataclass(frozen=True)
class Pointwise:
    """Evaluable result of a bracket that has no closed symbolic form here."""

    fn: Callable = field(repr=False)
    name: str = "pointwise"

    def evaluate(self, sigma, phi):
        return np.asarray(self.fn(np.asarray(sigma, dtype=float), np.asarray(phi, dtype=float)), dtype=complex)


def _identity(s):
    return np.asarray(s, dtype=float)


def _one(s):
    return np.ones_like(np.asarray(s, dtype=float))


def _cubic(s):
    return s + s**3 / 3.0


def _cubic_d(s):
    return 1.0 + s**2


def _arcsin_d(s):
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(1.0 - np.asarray(s, dtype=float) ** 2)


#: monotone position profiles q(sigma) and their derivatives
SIGMA_PRESETS = {
    "linear": (_identity, _one),
    "cubic": (_cubic, _cubic_d),
    "arcsin": (np.arcsin, _arcsin_d),
}


def sigma_preset(name):
    try:
        f, df = SIGMA_PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown profile preset {name!r}; choose from {sorted(SIGMA_PRESETS)}") from None
    return SigmaProfile(f, df, name)


# ---------------------------------------------------------------------------
# fuzzy matrices


def sample_points(n):
    """The N equidistant sigma values (N + 1 - 2j)/sqrt(N^2 - 1), j = 1..N."""
    _check_dim(n)
    j = np.arange(1, n + 1)
    return (n + 1 - 2 * j) / math.sqrt(n * n - 1.0)


def _check_dim(n):
    if int(n) != n or n < 2:
        raise DimensionError(f"fuzzy sphere size must be an integer >= 2, got {n}")


@lru_cache(maxsize=64)
def _generators(n):
    s = math.sqrt(n * n - 1.0)
    x3 = np.diag(sample_points(n)).astype(complex)
    j = np.arange(2, n + 1)
    xp = np.zeros((n, n), dtype=complex)
    xp[j - 2, j - 1] = 2.0 * np.sqrt((j - 1) * (n - j + 1)) / s
    x1 = 0.5 * (xp + xp.conj().T)
    x2 = -0.5j * (xp - xp.conj().T)
    for m in (x1, x2, x3):
        m.flags.writeable = False
    return x1, x2, x3


def build_generators(n):
    """Quantized coordinate functions (X1, X2, X3) of the N x N fuzzy sphere."""
    _check_dim(n)
    return tuple(m.copy() for m in _generators(int(n)))


def vortex(n):
    """V(N): ones on the first superdiagonal."""
    _check_dim(n)
    return np.eye(n, k=1, dtype=complex)


def all_ones(n):
    """K(N), the matrix with every entry equal to 1."""
    _check_dim(n)
    return np.ones((n, n), dtype=complex)


def _weyl_sums(gens):
    """Sum of all distinct words with exactly (a, b, c) letters X1, X2, X3.

    Filled by the recursion W(a,b,c) = X1 W(a-1,b,c) + X2 W(a,b-1,c) + X3 W(a,b,c-1).
    """
    n = gens[0].shape[0]
    memo = {(0, 0, 0): np.eye(n, dtype=complex)}

    def words(a, b, c):
        key = (a, b, c)
        if key not in memo:
            acc = np.zeros((n, n), dtype=complex)
            for g, prev in zip(gens, ((a - 1, b, c), (a, b - 1, c), (a, b, c - 1))):
                if min(prev) >= 0:
                    acc += g @ words(*prev)
            memo[key] = acc
        return memo[key]

    return words


def _quantize_polynomial(poly, n):
    words = _weyl_sums(_generators(n))
    out = np.zeros((n, n), dtype=complex)
    for (a, b, c), coeff in poly.terms.items():
        multinomial = math.factorial(a + b + c) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
        out += coeff * words(a, b, c) / multinomial
    return out


def quantize(f, n):
    """Fuzzy matrix Q_N(f).

    Polynomials use fully symmetrized (Weyl) ordering of the generators.
    ``DeltaSigmaDiag`` and ``DeltaFull`` live on the product of two spheres and
    return a :class:`TensorOperator`.
    """
    _check_dim(n)
    n = int(n)
    if isinstance(f, Polynomial):
        return _quantize_polynomial(f, n)
    if isinstance(f, SigmaProfile):
        sig = sample_points(n)
        with np.errstate(all="ignore"):
            try:
                vals = np.asarray(f.f(sig), dtype=complex)
            except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
                raise DomainError(f"profile {f.name!r} failed on the sample points: {exc}") from exc
        vals = np.broadcast_to(vals, sig.shape)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise DomainError(f"profile {f.name!r} undefined at sigma={sig[bad[0]]!r} (row {bad[0] + 1})")
        return np.diag(vals)
    if isinstance(f, VortexPower):
        v = vortex(n)
        if f.k < 0:
            v = v.conj().T
        return np.linalg.matrix_power(v, abs(f.k))
    if isinstance(f, DeltaPhi):
        return all_ones(n) / (2.0 * math.pi)
    if isinstance(f, DeltaSigmaDiag):
        return diagonal_coincidence(n) * (n / 2.0)
    if isinstance(f, DeltaFull):
        return transposition(n) * (n / (4.0 * math.pi))
    raise UnsupportedRepresentationError(f"cannot quantize {type(f).__name__}")


def fuzzy_norm(a):
    """sqrt((2/N) tr A^dagger A), the norm matched to the fuzzy trace rule."""
    a = np.asarray(a)
    n = a.shape[0]
    return math.sqrt(2.0 / n * float(np.sum(np.abs(a) ** 2)))


def max_norm(a):
    a = a.entries if isinstance(a, TensorOperator) else np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------------------------
# the classical bracket on the sphere

_LEVI_CIVITA = [
    (1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1),
    (2, 1, 3, -1), (3, 2, 1, -1), (1, 3, 2, -1),
]


def _poly_bracket(f, g):
    out = Polynomial()
    for i, j, k, sign in _LEVI_CIVITA:
        out = out + sign * Polynomial.coordinate(k) * f.derivative(i) * g.derivative(j)
    return out


def _profile_with(prof, g):
    """{prof(sigma), g} = -prof'(sigma) d_phi g."""
    if prof.df is None:
        raise UnsupportedRepresentationError(f"profile {prof.name!r} has no derivative")
    if isinstance(g, SigmaProfile):
        return Polynomial()
    if isinstance(g, Polynomial):
        dg = g.d_phi()
        return Pointwise(lambda s, p: -np.asarray(prof.df(s)) * dg.evaluate(s, p), f"{{{prof.name}, poly}}")
    if isinstance(g, VortexPower):
        k = g.k
        return Pointwise(lambda s, p: -1j * k * np.asarray(prof.df(s)) * np.exp(1j * k * p), f"{{{prof.name}, e^{k}iphi}}")
    raise UnsupportedRepresentationError(f"no closed form for {{SigmaProfile, {type(g).__name__}}}")


def _negate(h):
    if isinstance(h, Polynomial):
        return -h
    return Pointwise(lambda s, p: -h.fn(s, p), f"-{h.name}")


def sphere_bracket(f, g):
    """{f, g} = d_phi f d_sigma g - d_sigma f d_phi g, oriented so that {x1, x2} = x3."""
    if isinstance(f, Polynomial) and isinstance(g, Polynomial):
        return _poly_bracket(f, g)
    if isinstance(f, VortexPower) and isinstance(g, VortexPower):
        return Polynomial()
    if isinstance(f, SigmaProfile):
        return _profile_with(f, g)
    if isinstance(g, SigmaProfile):
        return _negate(_profile_with(g, f))
    raise UnsupportedRepresentationError(
        f"no closed-form bracket for ({type(f).__name__}, {type(g).__name__})"
    )


# ---------------------------------------------------------------------------
# integrals


def sphere_moment(a, b, c):
    """(1/2pi) * integral over S^2 of x1^a x2^b x3^c against d sigma ^ d phi."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    lg = math.lgamma
    log_val = lg((a + 1) / 2) + lg((b + 1) / 2) + lg((c + 1) / 2) - lg((a + b + c + 3) / 2)
    return 2.0 * math.exp(log_val) / (2.0 * math.pi)


def sphere_average(f):
    """(1/2pi) * integral of f over the sphere; 2 for the constant function 1."""
    if isinstance(f, Polynomial):
        return sum(coeff * sphere_moment(*mono) for mono, coeff in f.terms.items())
    if isinstance(f, SigmaProfile):
        from scipy.integrate import quad

        def half_sums(part):
            # split at 0 so odd profiles do not ask quad to resolve an exact zero
            return sum(
                quad(lambda s: part(complex(f.f(s))), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
                for lo, hi in ((-1.0, 0.0), (0.0, 1.0))
            )

        return complex(half_sums(lambda z: z.real), half_sums(lambda z: z.imag))
    if isinstance(f, VortexPower):
        return 2.0 if f.k == 0 else 0.0
    raise UnsupportedRepresentationError(f"cannot integrate {type(f).__name__}")


# ---------------------------------------------------------------------------
# correspondence checks

MAX_CORRESPONDENCE_DEGREE = 4


def correspondence_residuals(f, g, n):
    """Residuals of the product, commutator and trace rules for Q_N.

    Returns ``(r1, r2, r3)`` with
    ``r1 = ||Q(f)Q(g) - Q(fg)||_N``,
    ``r2 = ||[Q(f), Q(g)] - i(2/N) Q({f, g})||_N`` and
    ``r3 = |(2/N) tr Q(f) - (1/2pi) int f|``.
    """
    for h in (f, g):
        if not isinstance(h, Polynomial):
            raise UnsupportedRepresentationError("correspondence residuals need polynomial functions")
        if h.degree > MAX_CORRESPONDENCE_DEGREE:
            raise PreconditionError(f"degree {h.degree} exceeds {MAX_CORRESPONDENCE_DEGREE}")
    qf, qg = quantize(f, n), quantize(g, n)
    r1 = fuzzy_norm(qf @ qg - quantize(f * g, n))
    r2 = fuzzy_norm(qf @ qg - qg @ qf - 1j * (2.0 / n) * quantize(sphere_bracket(f, g), n))
    r3 = abs(2.0 / n * np.trace(qf) - sphere_average(f))
    return r1, r2, float(r3)


def full_delta_pairing_residual(qf):
    """Max-entry residual of (4pi/N) tr_2(Q(delta delta) (1 (x) Q(f))) = Q(f)."""
    qf = np.asarray(qf)
    n = qf.shape[0]
    lhs = (quantize(DeltaFull(), n) @ slot2(qf)).partial_trace(2) * (4.0 * math.pi / n)
    return max_norm(lhs - qf)


def diagonal_delta_pairing_residual(qf):
    """Max-entry residual of (2/N) tr_2(Q(delta(sigma1 - sigma2)) (1 (x) Q(f))) = Q(f).

    Only valid for diagonal (phi-independent) Q(f).
    """
    qf = np.asarray(qf)
    if np.any(qf[~np.eye(qf.shape[0], dtype=bool)] != 0):
        raise PreconditionError("diagonal-delta pairing needs a diagonal Q(f)")
    n = qf.shape[0]
    lhs = (quantize(DeltaSigmaDiag(), n) @ slot2(qf)).partial_trace(2) * (2.0 / n)
    return max_norm(lhs - qf)


def pairing_identity_check(f, n):
    """Both partial-trace reproduction residuals (full delta, diagonal delta) for f."""
    qf = quantize(f, n)
    return full_delta_pairing_residual(qf), diagonal_delta_pairing_residual(qf)


def fuzzy_sphere_relation_residual(n):
    _check_dim(n)
    x1, x2, x3 = _generators(int(n))
    return max_norm(x1 @ x1 + x2 @ x2 + x3 @ x3 - np.eye(n))


def vortex_factorization_residual(n):
    """Max-entry residual of Q(x1 + i x2) = sqrt(1 - a X3) sqrt(1 + b X3) V(N).

    ``1 + b X3`` vanishes in its last entry (up to rounding); that row meets the
    zero last row of V(N), so only positive semidefiniteness is required.
    """
    left, right = vortex_factor_diagonals(n)
    x1, x2, _ = _generators(int(n))
    if np.any(left < -1e-12) or np.any(right < -1e-12):
        raise DomainError("square-root factors are not positive semidefinite")
    rhs = np.diag(np.sqrt(np.clip(left, 0.0, None)) * np.sqrt(np.clip(right, 0.0, None))) @ vortex(n)
    return max_norm(x1 + 1j * x2 - rhs)


def vortex_factor_diagonals(n):
    """Diagonals of 1 - a X3 and 1 + b X3 with a = sqrt(N-1)/sqrt(N+1), b = 1/a."""
    _check_dim(n)
    a = math.sqrt(n - 1) / math.sqrt(n + 1)
    d = sample_points(n)
    return 1.0 - a * d, 1.0 + d / a


def rotation_unitary(n, alpha):
    """U(alpha) = diag(exp(i alpha (N + 1 - 2k)/2)), implementing z-rotations."""
    k = np.arange(1, n + 1)
    return np.diag(np.exp(0.5j * alpha * (n + 1 - 2 * k)))


def rotate_z(poly, alpha):
    """f o rot_z(alpha), rot_z advancing the azimuth by alpha."""
    c, s = math.cos(alpha), math.sin(alpha)
    return poly.compose_linear([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# parsing of function strings (command line)


def parse_function(text):
    """Parse a sphere-function string.

    Accepted forms: ``sigma-profile:<preset>``, ``vortex:<k>``, ``delta-phi`` or a
    polynomial expression in x1, x2, x3 with ``+ - * ^`` and parentheses.
    """
    stripped = text.strip()
    if stripped.startswith("sigma-profile:"):
        return sigma_preset(stripped.split(":", 1)[1].strip())
    if stripped.startswith("vortex:"):
        arg = stripped.split(":", 1)[1].strip()
        try:
            return VortexPower(int(arg))
        except ValueError:
            raise ParseError(f"vortex power must be an integer, got {arg!r}", text.index(":") + 1) from None
    if stripped == "delta-phi":
        return DeltaPhi()
    return _PolyParser(text).parse()


class _PolyParser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, msg):
        raise ParseError(f"{msg} at column {self.pos + 1}: {self.text!r}", self.pos)

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self):
        if not self.peek():
            self.error("empty function string")
        out = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return out

    def expr(self):
        sign = 1
        if self.peek() in "+-":
            sign = -1 if self.text[self.pos] == "-" else 1
            self.pos += 1
        out = sign * self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            t = self.term()
            out = out + t if op == "+" else out - t
        return out

    def term(self):
        out = self.power()
        while self.peek() == "*":
            self.pos += 1
            out = out * self.power()
        return out

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if start == self.pos:
                self.error("expected integer exponent")
            base = base ** int(self.text[start:self.pos])
        return base

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            out = self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return out
        if ch == "x":
            if self.pos + 1 < len(self.text) and self.text[self.pos + 1] in "123":
                i = int(self.text[self.pos + 1])
                self.pos += 2
                return Polynomial.coordinate(i)
            self.error("expected x1, x2 or x3")
        if ch.isdigit() or ch == ".":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"):
                self.pos += 1
            try:
                return Polynomial.constant(float(self.text[start:self.pos]))
            except ValueError:
                self.pos = start
                self.error("malformed number")
        self.error(f"unexpected {ch!r}" if ch else "unexpected end of input")
