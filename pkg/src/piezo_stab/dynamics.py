"""Implicit-midpoint time stepping with an exact discrete energy law, and decay fits.

For ``M x'' + D x' + K x = 0`` the midpoint rule gives

    E(w+) - E(w) = -dt * v_mid^T D v_mid,    v_mid = (v + v+)/2,

so the scheme conserves energy exactly when ``D = 0`` and dissipates exactly
the damping work otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .characteristic import lift_resonant_mode, sigma_pm
from .errors import DegenerateTrace, SingularSolve
from .fem import DiscreteSystem, apply_generator, energy, energy_norm_sq, project_mean_zero
from .params import Variant

__all__ = [
    "MidpointStepper",
    "EnergyTrace",
    "DecayModel",
    "DecayFit",
    "integrate",
    "default_dt",
    "generic_initial_state",
    "undamped_modes",
    "lifted_resonant_state",
    "fit_decay",
    "conservative",
]


class MidpointStepper:
    """One factorisation of ``S = M + dt/2 D + dt^2/4 K``, reused for every step.

    ``dt`` may be negative (backward stepping).
    """

    def __init__(self, sys: DiscreteSystem, dt: float):
        if dt == 0 or not math.isfinite(dt):
            raise ValueError(f"dt must be finite and nonzero (got {dt})")
        self.sys = sys
        self.dt = dt
        M, K, D = sys.M, sys.K, sys.D
        S = (M + (dt / 2) * D + (dt * dt / 4) * K).tocsc()
        self._rhs = (M - (dt / 2) * D - (dt * dt / 4) * K).tocsr()
        try:
            self._lu = spla.splu(S)
        except RuntimeError as exc:
            raise SingularSolve(f"midpoint matrix is singular: {exc}") from exc

    def step(self, x, v):
        dt = self.dt
        v_new = self._lu.solve(self._rhs @ v - dt * (self.sys.K @ x))
        x_new = x + (dt / 2) * (v + v_new)
        return x_new, v_new

    def matrix(self) -> np.ndarray:
        """Dense one-step map ``w -> w+`` (small systems only)."""
        n = self.sys.n
        cols = []
        for j in range(2 * n):
            w = np.zeros(2 * n)
            w[j] = 1.0
            x, v = self.step(w[:n], w[n:])
            cols.append(np.concatenate([x, v]))
        return np.column_stack(cols)


@dataclass
class EnergyTrace:
    """Energies at ``times``; ``surrogate_norm`` is ``||A w0||_E + ||w0||_E``.

    ``identity_residual`` is the largest per-step defect of the discrete
    energy law relative to ``E(0)``.
    """

    times: np.ndarray
    energies: np.ndarray
    surrogate_norm: float
    identity_residual: float
    final_state: np.ndarray
    dt: float

    @property
    def e0(self) -> float:
        return float(self.energies[0])

    @property
    def ratio(self) -> np.ndarray:
        return self.energies / self.energies[0]

    def max_increase(self) -> float:
        """Largest step-to-step energy increase relative to ``E(0)``."""
        return float(max(0.0, np.max(np.diff(self.energies), initial=0.0)) / self.e0)

    def to_csv(self) -> str:
        out = ["t,E,E/E0"]
        e0 = self.e0
        out += [f"{t:.17g},{e:.17g},{e / e0:.17g}" for t, e in zip(self.times, self.energies)]
        return "\n".join(out) + "\n"


def default_dt(sys: DiscreteSystem) -> float:
    """``h_min / (2 c_max)`` with speeds ``sqrt(c1)``, ``sqrt(c2)`` and ``1/sigma_-``."""
    cfg = sys.config
    speeds = [math.sqrt(float(cfg.c2)), 1.0 / sigma_pm(cfg.materials).sigma_minus]
    if cfg.c1 is not None and cfg.variant is Variant.EPE:
        speeds.append(math.sqrt(float(cfg.c1)))
    return sys.mesh.h_min / (2.0 * max(speeds))


def integrate(sys: DiscreteSystem, w0, dt: float, T: float, record_every: int = 1) -> EnergyTrace:
    """Midpoint integration of ``w' = A_d w`` over ``[0, T]``.

    The number of steps is ``round(T/dt)``; energy is recorded every
    ``record_every`` steps (and always at the end).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0 (got {dt})")
    n_steps = int(round(T / dt))
    if n_steps < 1:
        raise ValueError(f"horizon {T} shorter than one step {dt}")
    x, v = (np.array(a, dtype=float) for a in sys.split(w0))
    stepper = MidpointStepper(sys, dt)
    e0 = energy(sys, np.concatenate([x, v]))
    surrogate = math.sqrt(energy_norm_sq(sys, apply_generator(sys, np.concatenate([x, v])))) + math.sqrt(2 * e0)
    times, energies = [0.0], [e0]
    e_prev = e0
    worst = 0.0
    D = sys.D
    for k in range(1, n_steps + 1):
        x_new, v_new = stepper.step(x, v)
        e_new = 0.5 * float(v_new @ (sys.M @ v_new) + x_new @ (sys.K @ x_new))
        vm = 0.5 * (v + v_new)
        defect = e_new - e_prev + dt * float(vm @ (D @ vm))
        worst = max(worst, abs(defect))
        x, v, e_prev = x_new, v_new, e_new
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            energies.append(e_new)
    rel = worst / e0 if e0 > 0 else worst
    return EnergyTrace(np.array(times), np.array(energies), surrogate, rel, np.concatenate([x, v]), dt)


def _smooth_fields(sys: DiscreteSystem) -> np.ndarray:
    xs = sys.coords
    L = float(sys.config.geometry.L)
    n = sys.n
    x = np.zeros(n)
    v = np.zeros(n)
    disp = np.setdiff1d(np.arange(n), sys.fields["p"])
    s = xs[disp] / L
    x[disp] = np.sin(math.pi * s) + 0.5 * np.sin(2 * math.pi * s)
    v[disp] = np.sin(3 * math.pi * s)
    p = sys.fields["p"]
    a, b = (float(t) for t in sys.config.geometry.piezo_layer)
    t = (xs[p] - a) / (b - a)
    if sys.variant is Variant.PE:
        x[p], v[p] = np.sin(math.pi * t), np.sin(2 * math.pi * t)
    else:
        x[p], v[p] = np.cos(math.pi * t), np.cos(2 * math.pi * t)
    return np.concatenate([x, v])


def undamped_modes(sys: DiscreteSystem, omega_max: float):
    """Frequencies and ``M``-orthonormal shapes of ``K phi = omega^2 M phi`` up to ``omega_max``."""
    w2, phi = sla.eigh(sys.K.toarray(), sys.M.toarray(), subset_by_value=(-np.inf, omega_max**2))
    return np.sqrt(np.clip(w2, 0.0, None)), phi


def generic_initial_state(sys: DiscreteSystem, omega_max: float = 30.0) -> np.ndarray:
    """Deterministic state exciting every field, band-limited to ``omega <= omega_max``.

    A smooth profile is projected onto the undamped modes below a fixed
    frequency, so the datum is compatible with every transmission condition
    and does not feed the poorly resolved top of the discrete spectrum.
    The charge mean is removed.
    """
    w = _smooth_fields(sys)
    x, v = sys.split(w)
    _, phi = undamped_modes(sys, omega_max)
    x = phi @ (phi.T @ (sys.M @ x))
    v = phi @ (phi.T @ (sys.M @ v))
    return project_mean_zero(sys, np.concatenate([x, v]))


def lifted_resonant_state(sys: DiscreteSystem, witness) -> np.ndarray:
    """Real initial state of the undamped P/E eigenmode for ``witness``.

    The time-harmonic mode ``(v, p) e^{i lam t}`` with ``y = 0`` has real part
    ``(v, p) cos(lam t)``: positions ``(v, p, 0)`` and zero velocity.
    """
    if sys.variant is not Variant.PE:
        raise ValueError("resonant modes live in the P/E system")
    l1 = float(sys.config.geometry.l1)
    xs = sys.coords
    n = sys.n
    x = np.zeros(n)
    disp = np.setdiff1d(np.arange(n), sys.fields["p"])
    piezo = disp[xs[disp] <= l1 + 1e-12]
    v_vals, _ = lift_resonant_mode(witness, sys.config.materials, xs[piezo])
    x[piezo] = v_vals
    p = sys.fields["p"]
    _, p_vals = lift_resonant_mode(witness, sys.config.materials, xs[p])
    x[p] = p_vals
    return np.concatenate([x, np.zeros(n)])


class DecayModel(enum.Enum):
    EXPONENTIAL = "exponential"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class DecayFit:
    """``E ~ M exp(-omega t)`` or ``E ~ C t^{-exponent}`` fitted on ``window``."""

    model: DecayModel
    rate: float  # omega or the polynomial exponent
    prefactor: float  # M or C
    window: tuple[float, float]
    r_squared: float

    def to_csv(self) -> str:
        name = "omega" if self.model is DecayModel.EXPONENTIAL else "exponent"
        pre = "M" if self.model is DecayModel.EXPONENTIAL else "C"
        return (
            "model,param,value\n"
            f"{self.model.value},{name},{self.rate:.17g}\n"
            f"{self.model.value},{pre},{self.prefactor:.17g}\n"
            f"{self.model.value},window_start,{self.window[0]:.17g}\n"
            f"{self.model.value},window_end,{self.window[1]:.17g}\n"
            f"{self.model.value},r_squared,{self.r_squared:.17g}\n"
        )


def fit_decay(trace: EnergyTrace, model="exponential") -> DecayFit:
    """Least squares on ``log E`` against ``t`` (exponential) or ``log t`` (polynomial).

    The window is ``[0.1 T, T]``.
    """
    model = DecayModel(model)
    t = np.asarray(trace.times, dtype=float)
    E = np.asarray(trace.energies, dtype=float)
    if len(t) < 50:
        raise DegenerateTrace(f"need at least 50 samples (got {len(t)})")
    if np.any(E < 1e-300):
        raise DegenerateTrace("energy fell below 1e-300; the logarithmic fit is meaningless")
    if not E[-1] < E[0]:
        raise DegenerateTrace("energy never decreased")
    T = t[-1]
    sel = t >= 0.1 * T
    ts, ys = t[sel], np.log(E[sel])
    xs = ts if model is DecayModel.EXPONENTIAL else np.log(ts)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(model, -float(slope), float(math.exp(intercept)), (float(ts[0]), float(T)), r2)


def conservative(sys: DiscreteSystem) -> DiscreteSystem:
    """Copy of ``sys`` with ``D = 0``."""
    return DiscreteSystem(
        sys.config, sys.mesh, sys.M, sys.K, sp.csr_matrix(sys.D.shape), sys.fields, sys.coords, sys.e_p
    )
