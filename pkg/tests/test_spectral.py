import math

import numpy as np
import pytest

from piezo_stab.dynamics import conservative
from piezo_stab.errors import TooLarge
from piezo_stab.fem import assemble, build_mesh
from piezo_stab.spectral import (
    ResolventEvaluator,
    energy_symmetrized_generator,
    nearest_eigenvalues,
    parse_grid,
    resolvent_norm,
    resolvent_sweep,
    spectrum,
)

from conftest import epe_config, pe_config


def make(cfg, n):
    return assemble(cfg, build_mesh(cfg, n))


EPE = make(epe_config(), 12)
PE_RES = make(pe_config(), 40)
PE_MIX = make(pe_config(mats=(1, 1, 1, 0, 4)), 12)


@pytest.mark.parametrize("sys_", [EPE, PE_RES, PE_MIX], ids=["epe", "pe-res", "pe-mix"])
def test_spectrum_invariants(sys_):
    rep = spectrum(sys_)
    ev = rep.eigenvalues
    assert rep.abscissa <= 1e-10
    assert np.all(ev.real <= 1e-10)
    # conjugate-symmetric
    a = np.sort_complex(ev)
    b = np.sort_complex(ev.conj())
    np.testing.assert_allclose(a, b, atol=1e-10 * np.abs(ev).max())
    assert rep.to_csv().splitlines()[0] == "re,im"


def test_symmetrized_generator_matches_generator_spectrum():
    B = energy_symmetrized_generator(EPE)
    Mr, Kr, Dr, _ = EPE.reduced()
    k = Mr.shape[0]
    A = np.block([[np.zeros((k, k)), np.eye(k)], [-np.linalg.solve(Mr.toarray(), Kr.toarray()),
                                                   -np.linalg.solve(Mr.toarray(), Dr.toarray())]])
    ea = np.sort_complex(np.linalg.eigvals(A))
    eb = np.sort_complex(np.linalg.eigvals(B))
    np.testing.assert_allclose(ea, eb, atol=1e-8 * np.abs(ea).max())


def test_undamped_spectrum_is_imaginary():
    rep = spectrum(conservative(EPE))
    assert np.abs(rep.eigenvalues.real).max() < 1e-10
    B = energy_symmetrized_generator(conservative(EPE))
    np.testing.assert_allclose(B, -B.T, atol=1e-12)


def test_resonance_matched_by_eigenvalue():
    rep = spectrum(PE_RES)
    assert rep.resonance_matches
    lam, z, gap = rep.resonance_matches[0]
    assert lam == pytest.approx(math.pi / 2)
    assert gap < 5e-3
    assert abs(z.real) < 1e-10


def test_nearest_eigenvalues_agree_with_dense():
    target = 1j * math.pi / 2
    z = nearest_eigenvalues(PE_RES, target, k=1)[0]
    dense = spectrum(PE_RES).eigenvalues
    assert abs(z - dense[np.argmin(np.abs(dense - target))]) < 1e-9


@pytest.mark.parametrize("sys_", [EPE, PE_MIX], ids=["epe", "pe-mix"])
@pytest.mark.parametrize("lam", [0.0, 0.7, 3.1, 9.5])
def test_sparse_norm_matches_dense_svd(sys_, lam):
    ev = ResolventEvaluator(sys_)
    assert ev.norm(lam) == pytest.approx(ev.dense_norm(lam), rel=1e-8)


@pytest.mark.parametrize("lam", [0.5, 2.0, 7.0])
def test_norm_symmetric_and_above_distance_bound(lam):
    ev = ResolventEvaluator(EPE)
    n = ev.norm(lam)
    assert n == pytest.approx(ev.norm(-lam), rel=1e-8)
    assert n >= (1 - 1e-10) / ev.distance_to_spectrum(lam)


def test_norm_at_zero_finite():
    assert math.isfinite(resolvent_norm(EPE, 0.0))
    assert resolvent_norm(EPE, 0.0) > 0


def test_too_large():
    cfg = epe_config()
    with pytest.raises(TooLarge):
        ResolventEvaluator(make(cfg, 1100))


def test_sweep_perturbs_eigen_ordinates():
    sys_ = conservative(EPE)
    w = np.sort(np.abs(spectrum(sys_).eigenvalues.imag))
    lam = w[w > 1][0]
    sweep = resolvent_sweep(sys_, [lam - 1.0, lam, lam + 1.0])
    assert sweep.perturbed == [1]
    assert sweep.lambdas[1] == pytest.approx(lam + 0.5)
    assert np.all(np.isfinite(sweep.norms)) and np.all(sweep.norms > 0)


def test_sweep_flags_resonance_and_grows():
    sweeps = []
    for n in (20, 40):
        sys_ = make(pe_config(), n)
        grid = np.linspace(1.0, 3.0, 41)
        sweeps.append(resolvent_sweep(sys_, grid, jobs=2))
    lam_star = math.pi / 2
    for s in sweeps:
        near = s.norms[np.argmin(np.abs(s.lambdas - lam_star))]
        assert near > 10 * np.median(s.norms)
    assert sweeps[1].sup > sweeps[0].sup


def test_sweep_csv_and_jobs_agree():
    grid = parse_grid("1:5:9")
    a = resolvent_sweep(PE_MIX, grid, jobs=1)
    b = resolvent_sweep(PE_MIX, grid, jobs=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "lambda,norm"
    assert math.isfinite(a.growth_exponent)


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    for bad in ("1:2", "a:b:c", "2:1:4", "0:1:0"):
        with pytest.raises(ValueError):
            parse_grid(bad)
