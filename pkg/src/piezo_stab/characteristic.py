"""Closed-form frequency-domain quantities of the piezoelectric layer.

For a frequency ``lam`` the reduced piezo system ``(v, v_x, p, p_x)' = N (v, v_x, p, p_x)``
has the characteristic quartic

    q(k) = alpha1*beta*k**4 + lam**2*(rho*beta + mu*alpha)*k**2 + mu*rho*lam**4

whose roots are ``+-i*lam*sigma_plus`` and ``+-i*lam*sigma_minus``.  Everything
here is closed form; the exact values live in ``Q(sqrt(Delta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DecoupledGamma, NotResonant
from .params import MaterialParams, to_fraction
from .surd import QuadSurd, sqrt_rational

__all__ = [
    "SpectralData",
    "ResonanceWitness",
    "sigma_pm",
    "b_pm",
    "b_pm_exact",
    "char_poly",
    "char_poly_roots",
    "generator_matrix",
    "transfer_matrix",
    "transfer_sweep",
    "transfer_csv",
    "TRANSFER_COLUMNS",
    "find_resonances",
    "brute_force_resonances",
    "resonant_mode",
    "resonant_mode_derivative",
    "quartic_residual",
    "lift_resonant_mode",
]


@dataclass(frozen=True)
class SpectralData:
    """sigma_+/-, the discriminant and (for gamma > 0) b_+/-, exact and float."""

    sigma_plus: float
    sigma_minus: float
    sigma_plus_sq: QuadSurd
    sigma_minus_sq: QuadSurd
    discriminant: Fraction
    A: Fraction
    product_sq: Fraction  # sigma_+^2 sigma_-^2 = mu*rho/(beta*alpha1)
    b_plus: float | None = None
    b_minus: float | None = None
    b_plus_exact: QuadSurd | None = None
    b_minus_exact: QuadSurd | None = None

    @property
    def quotient(self) -> float:
        return self.sigma_plus / self.sigma_minus


def _discriminant(m: MaterialParams) -> tuple[Fraction, Fraction]:
    A = m.rho * m.beta + m.mu * m.alpha
    delta = (m.rho * m.beta - m.mu * m.alpha) ** 2 + 4 * m.gamma**2 * m.beta**2 * m.mu * m.rho
    return A, delta


def sigma_pm(m: MaterialParams) -> SpectralData:
    A, delta = _discriminant(m)
    denom = 2 * m.beta * m.alpha1
    root = sqrt_rational(delta)
    sp2 = (QuadSurd(A) + root) / denom
    sm2 = (QuadSurd(A) - root) / denom
    prod = m.mu * m.rho / (m.beta * m.alpha1)

    f = m.f
    A_f = f.rho * f.beta + f.mu * f.alpha
    d_f = math.sqrt(float(delta))
    sp2_f = (A_f + d_f) / (2 * f.beta * f.alpha1)
    # product identity avoids cancellation in A - sqrt(delta)
    sm2_f = float(prod) / sp2_f

    bp = bm = None
    bpe = bme = None
    if m.gamma > 0:
        bpe, bme = b_pm_exact(m)
        bp, bm = b_pm(m)
    return SpectralData(
        sigma_plus=math.sqrt(sp2_f),
        sigma_minus=math.sqrt(sm2_f),
        sigma_plus_sq=sp2,
        sigma_minus_sq=sm2,
        discriminant=delta,
        A=A,
        product_sq=prod,
        b_plus=bp,
        b_minus=bm,
        b_plus_exact=bpe,
        b_minus_exact=bme,
    )


def b_pm_exact(m: MaterialParams) -> tuple[QuadSurd, QuadSurd]:
    if m.gamma == 0:
        raise DecoupledGamma("b_+/- divide by gamma; gamma = 0 decouples the layer")
    _, delta = _discriminant(m)
    root = sqrt_rational(delta)
    x = m.alpha * m.mu - m.rho * m.beta
    den = 2 * m.beta * m.gamma * m.mu
    return (QuadSurd(x) + root) / den, (QuadSurd(x) - root) / den


def b_pm(m: MaterialParams) -> tuple[float, float]:
    """Float ``(b_plus, b_minus)``, computed without cancellation."""
    if m.gamma == 0:
        raise DecoupledGamma("b_+/- divide by gamma; gamma = 0 decouples the layer")
    f = m.f
    x = f.alpha * f.mu - f.rho * f.beta
    root = math.sqrt(float(_discriminant(m)[1]))
    den = 2 * f.beta * f.gamma * f.mu
    prod = -f.rho / f.mu
    if x >= 0:
        bp = (x + root) / den
        bm = prod / bp
    else:
        bm = (x - root) / den
        bp = prod / bm
    return bp, bm


def char_poly(kappa, lam: float, m: MaterialParams):
    f = m.f
    k2 = np.asarray(kappa) ** 2
    return f.alpha1 * f.beta * k2**2 + lam**2 * (f.rho * f.beta + f.mu * f.alpha) * k2 + f.mu * f.rho * lam**4


def char_poly_roots(lam: float, m: MaterialParams) -> np.ndarray:
    """Roots ordered ``(+i k+, -i k+, +i k-, -i k-)`` with ``k+- = lam*sigma+-``."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    sd = sigma_pm(m)
    kp, km = lam * sd.sigma_plus, lam * sd.sigma_minus
    return np.array([1j * kp, -1j * kp, 1j * km, -1j * km])


def generator_matrix(lam: float, m: MaterialParams) -> np.ndarray:
    f = m.f
    l2 = lam * lam
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-l2 * f.rho / f.alpha1, 0.0, -l2 * f.gamma * f.mu / f.alpha1, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-l2 * f.rho * f.gamma / f.alpha1, 0.0, -l2 * f.mu * f.alpha / (f.alpha1 * f.beta), 0.0],
        ]
    )


def transfer_matrix(s: float, lam: float, m: MaterialParams) -> np.ndarray:
    """``exp(s N)`` assembled entry by entry from the closed forms."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    bp, bm = b_pm(m)
    sd = sigma_pm(m)
    kp, km = lam * sd.sigma_plus, lam * sd.sigma_minus
    d = bp - bm
    cp, cm = math.cos(s * kp), math.cos(s * km)
    sp, sm = math.sin(s * kp), math.sin(s * km)
    kk = km * kp * d
    E = np.empty((4, 4))
    E[0, 0] = E[1, 1] = (bp * cm - bm * cp) / d
    E[0, 1] = (bp * kp * sm - bm * km * sp) / kk
    E[0, 2] = (cp - cm) / d
    E[0, 3] = (km * sp - kp * sm) / kk
    E[1, 0] = (kp * bm * sp - km * bp * sm) / d
    E[1, 2] = (km * sm - kp * sp) / d
    E[2, 1] = bp * bm * (kp * sm - km * sp) / kk
    E[2, 2] = E[3, 3] = (bp * cp - bm * cm) / d
    E[2, 3] = (bp * km * sp - bm * kp * sm) / kk
    E[3, 2] = (bm * km * sm - bp * kp * sp) / d
    E[1, 3] = E[0, 2]
    E[2, 0] = -bp * bm * E[0, 2]
    E[3, 0] = -bp * bm * E[1, 2]
    E[3, 1] = -bp * bm * E[1, 3]
    return E


def transfer_sweep(s_values, lam: float, m: MaterialParams):
    """Rows ``(s, E11, E12, ..., E44)`` for CSV output."""
    return [(float(s), *transfer_matrix(float(s), lam, m).ravel()) for s in s_values]


TRANSFER_COLUMNS = ["s"] + [f"E{i}{j}" for i in range(1, 5) for j in range(1, 5)]


def transfer_csv(s_values, lam: float, m: MaterialParams) -> str:
    """Transfer-matrix sweep as CSV, columns ``s, E11..E44`` row-major."""
    rows = [",".join(TRANSFER_COLUMNS)]
    rows += [",".join(f"{v + 0.0:.17g}" for v in row) for row in transfer_sweep(s_values, lam, m)]
    return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class ResonanceWitness:
    """Odd pair ``(2n+ + 1, 2n- + 1)`` realising sigma+/sigma- and its frequency."""

    n_plus: int
    n_minus: int
    lambda_star: float
    kappa_plus: float
    kappa_minus: float
    sign: int

    @property
    def odd_pair(self) -> tuple[int, int]:
        return 2 * self.n_plus + 1, 2 * self.n_minus + 1


def _witness(n_plus: int, n_minus: int, l1: float, sigma_plus: float) -> ResonanceWitness:
    kp = (2 * n_plus + 1) * math.pi / (2 * l1)
    km = (2 * n_minus + 1) * math.pi / (2 * l1)
    # v(l1) = (-1)^n+ + sign*(-1)^n- must vanish
    sign = -1 if (n_plus + n_minus) % 2 == 0 else 1
    return ResonanceWitness(n_plus, n_minus, kp / sigma_plus, kp, km, sign)


def find_resonances(m: MaterialParams, l1, n_max: int, tol: float | None = None) -> list[ResonanceWitness]:
    """All ``(n+, n-)`` with ``n+, n- <= n_max`` and ``(2n+ + 1) sigma- = (2n- + 1) sigma+``.

    Exact mode (``tol is None``) uses the arithmetic classification of the
    quotient; float mode compares ``|(2n++1) s- - (2n-+1) s+| <= tol * s+``.
    """
    from .diophantine import QuotientKind, classify_quotient

    l1f = float(to_fraction(l1)) if not isinstance(l1, float) else l1
    sd = sigma_pm(m)
    if tol is None:
        cls = classify_quotient(m)
        if cls.kind is not QuotientKind.RATIONAL_ODD_ODD:
            raise NotResonant(f"quotient class {cls.kind.value} admits no odd/odd resonance")
        xp, xm = cls.xi_plus, cls.xi_minus
        out = []
        k = 1
        while k * xp <= 2 * n_max + 1 and k * xm <= 2 * n_max + 1:
            out.append(_witness((k * xp - 1) // 2, (k * xm - 1) // 2, l1f, sd.sigma_plus))
            k += 2
        return out
    out = []
    for n_p in range(n_max + 1):
        for n_m in range(n_max + 1):
            if abs((2 * n_p + 1) * sd.sigma_minus - (2 * n_m + 1) * sd.sigma_plus) <= tol * sd.sigma_plus:
                out.append(_witness(n_p, n_m, l1f, sd.sigma_plus))
    if not out:
        raise NotResonant("no odd pair within tolerance")
    return out


def brute_force_resonances(ratio: Fraction, n_max: int) -> list[tuple[int, int]]:
    """Reference enumeration over all odd pairs up to ``2 n_max + 1``."""
    ratio = Fraction(ratio)
    return [
        (n_p, n_m)
        for n_p in range(n_max + 1)
        for n_m in range(n_max + 1)
        if Fraction(2 * n_p + 1, 2 * n_m + 1) == ratio
    ]


def resonant_mode(w: ResonanceWitness, l1, x) -> np.ndarray:
    """``v(x) = sin(k+ x) + sign * sin(k- x)``."""
    x = np.asarray(x, dtype=float)
    return np.sin(w.kappa_plus * x) + w.sign * np.sin(w.kappa_minus * x)


def resonant_mode_derivative(w: ResonanceWitness, x, order: int) -> np.ndarray:
    """Exact ``order``-th derivative of :func:`resonant_mode`."""
    x = np.asarray(x, dtype=float)

    def dsin(k):
        # d^n/dx^n sin(kx) = k^n sin(kx + n pi/2)
        return k**order * np.sin(k * x + order * math.pi / 2)

    return dsin(w.kappa_plus) + w.sign * dsin(w.kappa_minus)


def quartic_residual(w: ResonanceWitness, m: MaterialParams, x) -> float:
    """Relative residual of ``alpha1 beta v'''' + lam^2 A v'' + mu rho lam^4 v`` at ``lambda_star``."""
    f = m.f
    lam = w.lambda_star
    r = (
        f.alpha1 * f.beta * resonant_mode_derivative(w, x, 4)
        + lam**2 * (f.rho * f.beta + f.mu * f.alpha) * resonant_mode_derivative(w, x, 2)
        + f.mu * f.rho * lam**4 * resonant_mode_derivative(w, x, 0)
    )
    scale = f.alpha1 * f.beta * max(w.kappa_plus, w.kappa_minus) ** 4
    return float(np.max(np.abs(r)) / scale)


def lift_resonant_mode(w: ResonanceWitness, m: MaterialParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Displacement and charge profiles ``(v, p)`` of the undamped eigenmode.

    For gamma > 0 the charge follows from the v-equation,
    ``p = (-alpha1 v_xx / lam^2 - rho v) / (gamma mu)``.  For gamma = 0 the two
    fields decouple: ``v`` must vanish (it cannot meet ``v(l1) = v_x(l1) = 0``
    on its own) and ``p`` is the sine component travelling at the charge
    speed ``sqrt(beta/mu)``.
    """
    f = m.f
    x = np.asarray(x, dtype=float)
    lam = w.lambda_star
    if m.gamma > 0:
        v = resonant_mode(w, None, x)
        vxx = resonant_mode_derivative(w, x, 2)
        p = (-f.alpha1 * vxx / lam**2 - f.rho * v) / (f.gamma * f.mu)
        return v, p
    sd = sigma_pm(m)
    sigma_p = math.sqrt(f.mu / f.beta)
    if math.isclose(sigma_p, sd.sigma_plus, rel_tol=1e-12):
        k = w.kappa_plus
    else:
        k = w.kappa_minus
    return np.zeros_like(x), np.sin(k * x)
