import math

import numpy as np
import pytest

from piezo_stab.characteristic import find_resonances
from piezo_stab.dynamics import (
    DecayModel,
    EnergyTrace,
    MidpointStepper,
    conservative,
    default_dt,
    fit_decay,
    generic_initial_state,
    integrate,
    lifted_resonant_state,
    undamped_modes,
)
from piezo_stab.errors import DegenerateTrace
from piezo_stab.fem import assemble, build_mesh, energy

from conftest import epe_config, pe_config

RNG = np.random.default_rng(7)


def small(cfg, n=10):
    return assemble(cfg, build_mesh(cfg, n))


def synthetic(times, energies):
    return EnergyTrace(np.asarray(times), np.asarray(energies), 1.0, 0.0, np.zeros(2), times[1] - times[0])


@pytest.mark.parametrize("cfg", [epe_config(), pe_config(mats=(1, 2, 1, 1, 1))], ids=["epe", "pe"])
def test_conservative_energy_drift(cfg):
    sys_ = conservative(small(cfg))
    w0 = RNG.standard_normal(sys_.dim)
    trace = integrate(sys_, w0, 0.01, 100.0, record_every=1)
    assert len(trace.energies) == 10_001
    steps = np.abs(np.diff(trace.energies))
    assert steps.max() <= 1e-12 * trace.e0
    assert trace.identity_residual <= 1e-12


@pytest.mark.parametrize("cfg", [epe_config(), pe_config()], ids=["epe", "pe"])
def test_damped_energy_identity(cfg):
    sys_ = small(cfg, 20)
    w0 = generic_initial_state(sys_)
    trace = integrate(sys_, w0, default_dt(sys_), 20.0)
    assert trace.identity_residual <= 1e-10
    assert trace.energies[-1] < trace.e0
    assert trace.max_increase() <= 1e-12


def test_time_reversal():
    sys_ = conservative(small(epe_config()))
    w = RNG.standard_normal(sys_.dim)
    x, v = sys_.split(w)
    fwd, bwd = MidpointStepper(sys_, 0.05), MidpointStepper(sys_, -0.05)
    x1, v1 = fwd.step(x, v)
    x2, v2 = bwd.step(x1, v1)
    np.testing.assert_allclose(np.concatenate([x2, v2]), w, atol=1e-10)


@pytest.mark.parametrize("n", [6, 30])
def test_undamped_step_is_unitary(n):
    cfg = pe_config(mats=(1, 2, 1, 1, 1))
    sys_ = conservative(small(cfg, n))
    ev = np.linalg.eigvals(MidpointStepper(sys_, 0.03).matrix())
    np.testing.assert_allclose(np.abs(ev), 1.0, atol=1e-10)


def test_damped_step_is_contractive():
    sys_ = small(pe_config(), 8)
    ev = np.linalg.eigvals(MidpointStepper(sys_, 0.03).matrix())
    assert np.abs(ev).max() <= 1 + 1e-10


def test_default_dt():
    cfg = epe_config()
    sys_ = small(cfg, 20)
    # speeds sqrt(c1) = sqrt(c2) = 1 and 1/sigma_- = phi
    assert default_dt(sys_) == pytest.approx((1 / 20) / (2 * (1 + math.sqrt(5)) / 2))


def test_rejects_bad_steps():
    sys_ = small(pe_config())
    w = np.zeros(sys_.dim)
    with pytest.raises(ValueError):
        integrate(sys_, w, 0.0, 1.0)
    with pytest.raises(ValueError):
        integrate(sys_, w, 0.1, 0.01)


def test_fit_exponential_recovery():
    t = np.linspace(0, 40, 400)
    fit = fit_decay(synthetic(t, 2.0 * np.exp(-0.3 * t)), "exponential")
    assert fit.model is DecayModel.EXPONENTIAL
    assert fit.rate == pytest.approx(0.3, rel=1e-2)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-2)
    assert fit.window[0] >= 4.0
    assert fit.r_squared > 0.999


def test_fit_polynomial_recovery():
    t = np.linspace(0, 2000, 4000)
    fit = fit_decay(synthetic(t, (1 + t) ** -0.5), "polynomial")
    assert fit.rate == pytest.approx(0.5, rel=2e-2)
    assert fit.to_csv().splitlines()[1].startswith("polynomial,exponent,")


def test_fit_degenerate():
    t = np.linspace(0, 10, 100)
    with pytest.raises(DegenerateTrace):
        fit_decay(synthetic(t[:20], np.exp(-t[:20])))
    with pytest.raises(DegenerateTrace):
        fit_decay(synthetic(t, np.ones_like(t)))
    with pytest.raises(DegenerateTrace):
        fit_decay(synthetic(t, np.exp(-100 * t)))


def test_trace_csv():
    t = np.linspace(0, 1, 3)
    text = synthetic(t, np.array([2.0, 1.0, 0.5])).to_csv()
    assert text.splitlines() == ["t,E,E/E0", "0,2,1", "0.5,1,0.5", "1,0.5,0.25"]


def test_generic_state_is_band_limited_and_mean_free():
    sys_ = small(epe_config(), 20)
    w = generic_initial_state(sys_, omega_max=10.0)
    x, v = sys_.split(w)
    c = sys_.M @ sys_.e_p
    assert abs(c @ x) < 1e-12 and abs(c @ v) < 1e-12
    omega, phi = undamped_modes(sys_, 40.0)
    coeff = phi.T @ (sys_.M @ x)
    assert np.abs(coeff[omega > 10.0 + 1e-9]).max() < 1e-10
    assert energy(sys_, w) > 0


def test_lifted_resonant_state_is_undamped_mode():
    cfg = pe_config()
    sys_ = small(cfg, 80)
    w = find_resonances(cfg.materials, 1, 1)[0]
    w0 = lifted_resonant_state(sys_, w)
    x, v = sys_.split(w0)
    assert np.all(v == 0)
    # nearly an eigenvector of K - lam^2 M, and untouched by the damping
    r = sys_.K @ x - w.lambda_star**2 * (sys_.M @ x)
    assert np.linalg.norm(r) < 1e-2 * np.linalg.norm(sys_.K @ x)
    assert np.abs(sys_.D @ x).max() == 0
    with pytest.raises(ValueError):
        lifted_resonant_state(small(epe_config()), w)
