"""Arithmetic of the speed quotient sigma_+/sigma_- and its decay consequences.

The decay regime of the P/E system depends only on the arithmetic nature of
``sigma_+/sigma_-``:

* a ratio of two odd integers produces undamped resonances (no strong stability),
* a ratio of an even and an odd integer gives exponential decay,
* an irrational quotient with irrationality measure ``varpi`` gives polynomial
  decay of the squared norm at rate ``2/(4 varpi - 4)``.

Classification is done in exact arithmetic.  Continued fractions of quadratic
surds use the exact periodic algorithm; other reals go through certified
interval arithmetic (:mod:`mpmath.iv`).
"""

from __future__ import annotations

import contextlib
import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from math import gcd, isqrt

import mpmath

from .errors import NotCoprime, PrecisionExhausted, UnknownConstant
from .params import MaterialParams
from .surd import QuadSurd, is_square, rational_sqrt, sqrt_rational

__all__ = [
    "QuotientKind",
    "Regime",
    "QuotientClass",
    "DecayVerdict",
    "ContinuedFraction",
    "ApproxVerdict",
    "MeasureBound",
    "MeasureReport",
    "classify_quotient",
    "user_irrational",
    "unknown_quotient",
    "parity_verdict",
    "rate_from_measure",
    "decay_prediction",
    "default_digits",
    "named_constant_interval",
    "continued_fraction",
    "badly_approximable",
    "measure_table",
    "measure_lookup",
    "verify_measure_inequality",
]

DEFAULT_DIGITS = 50
PRECISION_ENV = "PIEZO_STAB_PRECISION"


class QuotientKind(enum.Enum):
    RATIONAL_ODD_ODD = "RationalOddOdd"
    RATIONAL_MIXED_PARITY = "RationalMixedParity"
    QUADRATIC_SURD = "QuadraticSurd"
    HIGHER_ALGEBRAIC = "HigherAlgebraic"
    USER_SUPPLIED_IRRATIONAL = "UserSuppliedIrrational"
    UNKNOWN = "Unknown"


class Regime(enum.Enum):
    NOT_STRONGLY_STABLE = "NotStronglyStable"
    EXPONENTIAL = "Exponential"
    POLYNOMIAL = "Polynomial"
    UNKNOWN_RATE = "UnknownRate"


@dataclass(frozen=True)
class QuotientClass:
    """Arithmetic class of ``sigma_+/sigma_-``.

    ``exact_payload`` is the reduced :class:`~fractions.Fraction` for rational
    kinds, the :class:`~piezo_stab.surd.QuadSurd` for quadratic surds, and the
    exact square ``sigma_+^2/sigma_-^2`` (a surd) for higher algebraic quotients.
    """

    kind: QuotientKind
    quotient_value: float
    exact_payload: object = None
    xi_plus: int | None = None
    xi_minus: int | None = None
    varpi: float | None = None

    def label(self) -> str:
        if self.xi_plus is not None:
            return f"{self.kind.value} {self.xi_plus}/{self.xi_minus}"
        if self.kind is QuotientKind.QUADRATIC_SURD:
            return f"{self.kind.value} {self.exact_payload}"
        if self.kind is QuotientKind.USER_SUPPLIED_IRRATIONAL:
            return f"{self.kind.value} varpi={self.varpi}"
        return self.kind.value


def _parity_kind(xi_plus: int, xi_minus: int) -> QuotientKind:
    if xi_plus % 2 and xi_minus % 2:
        return QuotientKind.RATIONAL_ODD_ODD
    return QuotientKind.RATIONAL_MIXED_PARITY


def classify_quotient(m: MaterialParams) -> QuotientClass:
    """Exact classification of ``sigma_+/sigma_-`` from rational parameters.

    Float values are only attached for display; they never decide the kind.
    """
    from .characteristic import sigma_pm

    sd = sigma_pm(m)
    value = sd.sigma_plus / sd.sigma_minus
    A, delta = sd.A, sd.discriminant
    if is_square(delta):
        r = rational_sqrt(delta)
        ratio_sq = (A + r) / (A - r)
        if is_square(ratio_sq):
            ratio = rational_sqrt(ratio_sq)
            xp, xm = ratio.numerator, ratio.denominator
            return QuotientClass(_parity_kind(xp, xm), value, ratio, xp, xm)
        return QuotientClass(QuotientKind.QUADRATIC_SURD, value, sqrt_rational(ratio_sq))
    # ratio^2 = sigma_+^4 / (sigma_+ sigma_-)^2 lies in Q(sqrt(Delta)); the ratio
    # itself is quadratic iff that square has a root in the same field
    ratio_sq = sd.sigma_plus_sq * sd.sigma_plus_sq / sd.product_sq
    root = ratio_sq.sqrt()
    if root is not None:
        return QuotientClass(QuotientKind.QUADRATIC_SURD, value, root)
    return QuotientClass(QuotientKind.HIGHER_ALGEBRAIC, value, ratio_sq)


def user_irrational(varpi: float, value: float = math.nan) -> QuotientClass:
    """Quotient declared irrational with a caller-supplied measure bound ``varpi``."""
    if not varpi >= 2:
        raise ValueError(f"an irrationality measure is at least 2 (got {varpi})")
    return QuotientClass(QuotientKind.USER_SUPPLIED_IRRATIONAL, value, varpi=varpi)


def unknown_quotient(value: float = math.nan) -> QuotientClass:
    return QuotientClass(QuotientKind.UNKNOWN, value)


@dataclass(frozen=True)
class DecayVerdict:
    """Predicted regime.

    ``rate`` is the exponent ``r`` in ``E(t) <= C t^{-r} ||U0||^2_{D(A)}``, i.e.
    ``2/(4 varpi - 4)``.  ``witnesses`` lists resonant index pairs
    ``(n_plus, n_minus)``; ``resonances`` holds the full witnesses when the
    material parameters were available.
    """

    regime: Regime
    rate: Fraction | float | None = None
    varpi: Fraction | float | None = None
    ineffective: bool = False
    witnesses: tuple[tuple[int, int], ...] = ()
    resonances: tuple = field(default=(), compare=False)

    def describe(self) -> str:
        if self.regime is Regime.NOT_STRONGLY_STABLE:
            return "NOT strongly stable"
        if self.regime is Regime.EXPONENTIAL:
            return "Exponential"
        if self.regime is Regime.UNKNOWN_RATE:
            return "decay rate unknown"
        if self.ineffective:
            return f"Polynomial energy decay t^{{-({self.rate} - eps)}} for every eps > 0, constant ineffective"
        return f"Polynomial energy decay t^{{-{_fmt_rate(self.rate)}}}"


def _fmt_rate(r) -> str:
    if isinstance(r, Fraction):
        return str(r)
    return f"{r:.6g}"


def parity_verdict(xi_plus: int, xi_minus: int, m: MaterialParams | None = None, l1=None) -> DecayVerdict:
    """Regime implied by a rational quotient ``xi_plus/xi_minus`` in lowest terms.

    Both odd: the family ``(k xi_plus, k xi_minus)``, ``k`` odd, resonates; the
    smallest member is reported (and, given ``m`` and ``l1``, every witness up
    to the tenth odd multiple is attached with its frequency).
    """
    xp, xm = int(xi_plus), int(xi_minus)
    if xp <= 0 or xm <= 0 or gcd(xp, xm) != 1:
        raise NotCoprime(f"({xi_plus}, {xi_minus}) is not a pair of coprime positive integers")
    if not (xp % 2 and xm % 2):
        return DecayVerdict(Regime.EXPONENTIAL)
    witnesses = ((((xp - 1) // 2), (xm - 1) // 2),)
    resonances = ()
    if m is not None and l1 is not None:
        from .characteristic import find_resonances

        n_max = (19 * max(xp, xm) - 1) // 2
        resonances = tuple(find_resonances(m, l1, n_max))
        witnesses = tuple((w.n_plus, w.n_minus) for w in resonances)
    return DecayVerdict(Regime.NOT_STRONGLY_STABLE, witnesses=witnesses, resonances=resonances)


def rate_from_measure(varpi) -> Fraction | float:
    """Squared-norm decay exponent ``2/(4 varpi - 4)``; exact for rational ``varpi``."""
    if isinstance(varpi, (int, Fraction)):
        varpi = Fraction(varpi)
        if varpi < 2:
            raise ValueError(f"varpi must be >= 2 (got {varpi})")
        return Fraction(2) / (4 * varpi - 4)
    varpi = float(varpi)
    if not varpi >= 2:
        raise ValueError(f"varpi must be >= 2 (got {varpi})")
    return 2.0 / (4.0 * varpi - 4.0)


def decay_prediction(cls: QuotientClass) -> DecayVerdict:
    """Regime as a function of the quotient kind only."""
    k = cls.kind
    if k is QuotientKind.RATIONAL_MIXED_PARITY:
        return DecayVerdict(Regime.EXPONENTIAL)
    if k is QuotientKind.RATIONAL_ODD_ODD:
        return parity_verdict(cls.xi_plus, cls.xi_minus)
    if k is QuotientKind.QUADRATIC_SURD:
        return DecayVerdict(Regime.POLYNOMIAL, rate_from_measure(2), Fraction(2))
    if k is QuotientKind.HIGHER_ALGEBRAIC:
        # Roth: measure 2 + eps for every eps, with no computable constant
        return DecayVerdict(Regime.POLYNOMIAL, rate_from_measure(2), Fraction(2), ineffective=True)
    if k is QuotientKind.USER_SUPPLIED_IRRATIONAL:
        return DecayVerdict(Regime.POLYNOMIAL, rate_from_measure(cls.varpi), cls.varpi)
    return DecayVerdict(Regime.UNKNOWN_RATE)


# --------------------------------------------------------------------------
# continued fractions


@dataclass(frozen=True)
class ContinuedFraction:
    """``[a0; a1, ..., a_depth]`` with its convergents ``(p_n, q_n)``.

    ``exact`` marks expansions computed without rounding.  For quadratic surds
    ``preperiod`` and ``period`` describe the full (infinite) expansion.
    ``terminated`` is set when the number is rational and the expansion ended.
    """

    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    exact: bool
    preperiod: tuple[int, ...] | None = None
    period: tuple[int, ...] | None = None
    terminated: bool = False
    digits: int | None = None

    @property
    def periodic(self) -> bool:
        return self.period is not None

    @property
    def max_quotient(self) -> int | None:
        """Largest of ``a1, a2, ...`` (the whole expansion when periodic)."""
        tail = list(self.partial_quotients[1:])
        if self.period is not None:
            tail += list(self.period) + list(self.preperiod[1:])
        return max(tail) if tail else None


def _convergents(quotients) -> tuple[tuple[int, int], ...]:
    p0, q0, p1, q1 = 1, 0, quotients[0], 1
    out = [(p1, q1)]
    for a in quotients[1:]:
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        out.append((p1, q1))
    return tuple(out)


def default_digits() -> int:
    env = os.environ.get(PRECISION_ENV)
    if env:
        try:
            d = int(env)
        except ValueError:
            raise ValueError(f"{PRECISION_ENV} must be an integer (got {env!r})") from None
        if d < 5:
            raise ValueError(f"{PRECISION_ENV} must be >= 5 (got {d})")
        return d
    return DEFAULT_DIGITS


def _cf_rational(x: Fraction, depth: int) -> ContinuedFraction:
    qs = []
    n, d = x.numerator, x.denominator
    while d and len(qs) <= depth:
        a = n // d
        qs.append(a)
        n, d = d, n - a * d
    return ContinuedFraction(tuple(qs), _convergents(qs), exact=True, terminated=(d == 0))


def _surd_state(x: QuadSurd) -> tuple[int, int, int]:
    """Integers ``(P, Q, D)`` with ``x = (P + sqrt(D))/Q`` and ``Q | D - P^2``."""
    sgn = 1 if x.b > 0 else -1
    den = x.a.denominator * x.b.denominator // gcd(x.a.denominator, x.b.denominator)
    P = int(x.a * den)
    B = abs(x.b) * den  # integer
    D = int(B * B * x.radicand)
    Q = den
    if sgn < 0:
        # (P - sqrt D)/Q = (-P + sqrt D)/(-Q)
        P, Q = -P, -Q
    if (D - P * P) % Q:
        P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
    return P, Q, D


def _cf_surd(x: QuadSurd, depth: int, max_steps: int = 1_000_000) -> ContinuedFraction:
    P, Q, D = _surd_state(x)
    s = isqrt(D)
    seen: dict[tuple[int, int], int] = {}
    raw: list[int] = []
    while (P, Q) not in seen:
        if len(raw) >= max_steps:
            raise RuntimeError(f"no period within {max_steps} quotients")
        seen[(P, Q)] = len(raw)
        a = (P + s) // Q if Q > 0 else -((P + s) // -Q) - 1
        raw.append(a)
        P = a * Q - P
        Q = (D - P * P) // Q
    start = seen[(P, Q)]
    preperiod, period = tuple(raw[:start]), tuple(raw[start:])
    qs = [raw[k] if k < start else period[(k - start) % len(period)] for k in range(depth + 1)]
    return ContinuedFraction(tuple(qs), _convergents(qs), exact=True, preperiod=preperiod, period=period)


_NAMED = {
    "pi": lambda: mpmath.pi,
    "e": lambda: mpmath.e,
    "phi": lambda: mpmath.phi,
    "sqrt2": lambda: mpmath.sqrt(2),
    "ln2": lambda: mpmath.log(2),
    "ln3": lambda: mpmath.log(3),
    "zeta3": lambda: mpmath.zeta(3),
    "pi2": lambda: mpmath.pi**2,
}


def named_constant_interval(name: str, digits: int | None = None):
    """Enclosure of a named constant of half-width ``10**-digits``."""
    digits = default_digits() if digits is None else digits
    key = name.strip().lower().replace("(", "").replace(")", "").replace("^", "").replace("π", "pi")
    if key not in _NAMED:
        raise UnknownConstant(f"no generator for constant {name!r}; known: {', '.join(sorted(_NAMED))}")
    with mpmath.workdps(digits + 20):
        # unary plus forces lazy constants such as mpmath.pi to evaluate here
        v = +_NAMED[key]()
        radius = mpmath.mpf(10) ** (-digits)
    return _enclose(v, radius, digits)


@contextlib.contextmanager
def _iv_dps(dps):
    old = mpmath.iv.dps
    mpmath.iv.dps = dps
    try:
        yield
    finally:
        mpmath.iv.dps = old


def _enclose(v, radius, digits):
    # widened by one radius so endpoint rounding cannot shrink the enclosure
    with mpmath.workdps(digits + 20):
        lo, hi = v - 2 * radius, v + 2 * radius
    with _iv_dps(digits + 10):
        return mpmath.iv.mpf([lo, hi])


def _as_interval(x, digits):
    if isinstance(x, str):
        return named_constant_interval(x, digits)
    if isinstance(x, mpmath.ctx_iv.ivmpf):
        return x
    if isinstance(x, float):
        return _enclose(mpmath.mpf(x), mpmath.mpf(math.ulp(x)), digits)
    if isinstance(x, mpmath.mpf):
        return _enclose(x, mpmath.mpf(2) ** (-mpmath.mp.prec) * max(1, abs(x)), digits)
    raise TypeError(f"cannot expand {type(x).__name__}")


def _cf_interval(x, depth: int, digits: int) -> ContinuedFraction:
    iv = mpmath.iv
    qs: list[int] = []
    with _iv_dps(digits + 10):
        cur = iv.mpf(x)
        while len(qs) <= depth:
            lo, hi = cur.a, cur.b
            a = int(mpmath.floor(lo))
            if a != int(mpmath.floor(hi)) or lo == a:
                raise PrecisionExhausted(
                    f"{digits} digits certify only {len(qs)} partial quotients "
                    f"(enclosure [{float(lo.a):.10g}, {float(hi.b):.10g}]); "
                    f"raise {PRECISION_ENV} or digits"
                )
            qs.append(a)
            cur = 1 / (cur - a)
    return ContinuedFraction(tuple(qs), _convergents(qs), exact=False, digits=digits)


def continued_fraction(x, depth: int, digits: int | None = None) -> ContinuedFraction:
    """Continued fraction ``[a0; a1, ..., a_depth]`` of ``x``.

    ``x`` may be an ``int``/``Fraction`` or :class:`QuadSurd` (exact), the name
    of a constant (``"pi"``, ``"e"``, ``"ln2"``, ...), an :mod:`mpmath` interval,
    or an ``mpf``/``float`` taken to be accurate to its last bit.  Inexact
    inputs raise :class:`PrecisionExhausted` instead of returning an
    uncertified quotient.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(x, (int, Fraction)):
        return _cf_rational(Fraction(x), depth)
    if isinstance(x, QuadSurd):
        if x.is_rational:
            return _cf_rational(x.a, depth)
        return _cf_surd(x, depth)
    digits = default_digits() if digits is None else digits
    return _cf_interval(_as_interval(x, digits), depth, digits)


@dataclass(frozen=True)
class ApproxVerdict:
    answer: str  # "yes" | "no" | "undetermined"
    max_quotient: int | None

    def __str__(self):
        return f"{self.answer} (max partial quotient {self.max_quotient})"


def badly_approximable(cf: ContinuedFraction) -> ApproxVerdict:
    """Bounded partial quotients, decided only when the full expansion is known.

    A periodic expansion is certified bounded.  A finite float prefix can never
    refute boundedness, so it yields ``"undetermined"`` with the largest
    quotient seen.  A terminated expansion is rational, hence ``"no"``.
    """
    if cf.periodic:
        return ApproxVerdict("yes", cf.max_quotient)
    if cf.terminated:
        return ApproxVerdict("no", cf.max_quotient)
    return ApproxVerdict("undetermined", cf.max_quotient)


# --------------------------------------------------------------------------
# irrationality measures


@dataclass(frozen=True)
class MeasureBound:
    name: str
    bound: float
    bound_text: str
    source: str
    version: str


def _normalise(name: str) -> str:
    return name.strip().lower().replace(" ", "")


def measure_table() -> list[MeasureBound]:
    text = resources.files("piezo_stab").joinpath("data/irrationality_measures.csv").read_text(encoding="utf-8")
    version = ""
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            if "version" in line:
                version = line.rsplit("version", 1)[1].strip()
            continue
        lines.append(line)
    return [
        MeasureBound(r["name"], float(r["bound"]), r["bound"], r["source"], version)
        for r in csv.DictReader(io.StringIO("\n".join(lines)))
    ]


def _aliases():
    text = resources.files("piezo_stab").joinpath("data/irrationality_measures.csv").read_text(encoding="utf-8")
    rows = csv.DictReader(io.StringIO("\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))))
    out = {}
    for r in rows:
        for n in [r["name"], *r["aliases"].split(";")]:
            if n:
                out[_normalise(n)] = r["name"]
    return out


def measure_lookup(constant: str) -> MeasureBound:
    """Tabulated upper bound of the irrationality measure of ``constant``."""
    name = _aliases().get(_normalise(constant))
    if name is None:
        raise UnknownConstant(f"no tabulated irrationality measure for {constant!r}")
    return next(b for b in measure_table() if b.name == name)


@dataclass(frozen=True)
class MeasureReport:
    """Values ``|x - p/q| q^nu`` over convergents.

    ``minimum`` is over all samples; ``tail_minimum`` over the second half,
    which is what stabilises when ``nu`` is the true measure.
    """

    nu: float
    rows: tuple[tuple[int, int, int, float], ...]
    minimum: float
    tail_minimum: float
    argmin: int

    def to_csv(self) -> str:
        out = ["n,p,q,value"]
        out += [f"{n},{p},{q},{v:.17g}" for n, p, q, v in self.rows]
        return "\n".join(out) + "\n"


def _high_precision(x, digits):
    if isinstance(x, QuadSurd):
        return x.to_mpf(digits)
    if isinstance(x, str):
        return named_constant_interval(x, digits).mid
    return mpmath.mpf(x)


def verify_measure_inequality(x, nu, samples, digits: int | None = None) -> MeasureReport:
    """Evaluate ``|x - p_n/q_n| q_n^nu`` at each convergent ``(p_n, q_n)``.

    ``samples`` is a list of ``(p, q)`` pairs, typically
    ``continued_fraction(x, depth).convergents``.
    """
    digits = default_digits() if digits is None else digits
    if not samples:
        raise ValueError("need at least one convergent")
    rows = []
    with mpmath.workdps(digits + 20):
        xv = _high_precision(x, digits)
        nu_m = mpmath.mpf(nu)
        for n, (p, q) in enumerate(samples):
            val = abs(xv - mpmath.mpf(p) / q) * mpmath.mpf(q) ** nu_m
            rows.append((n, int(p), int(q), float(val)))
    vals = [r[3] for r in rows]
    i = min(range(len(vals)), key=vals.__getitem__)
    tail = vals[len(vals) // 2 :]
    return MeasureReport(float(nu), tuple(rows), vals[i], min(tail), i)
