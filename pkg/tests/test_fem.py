import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.integrate as si
import scipy.linalg as sla

from piezo_stab.errors import DimensionMismatch, MeshError, WrongVariant
from piezo_stab.fem import (
    apply_generator,
    assemble,
    build_mesh,
    c3_constant,
    dissipation_rate,
    energy,
    energy_inner,
    energy_norm_sq,
    export_triplets,
    norm_equivalence_constants,
    project_mean_zero,
    read_triplets,
    standard_norm_sq,
)
from piezo_stab.params import DampingProfile, Geometry, MaterialParams, SystemConfig, Variant

from conftest import epe_config, pe_config

RNG = np.random.default_rng(20240611)


def systems():
    return [
        assemble(epe_config(), build_mesh(epe_config(), 30)),
        assemble(pe_config(), build_mesh(pe_config(), 30)),
        assemble(pe_config(mats=(1, 2, 1, 1, 1)), build_mesh(pe_config(mats=(1, 2, 1, 1, 1)), (7, 11))),
        assemble(epe_config(mats=(2, 5, 3, 1, Fraction(1, 2)), c1=3, c2=Fraction(1, 2)), build_mesh(epe_config(), (5, 9, 4))),
    ]


SYSTEMS = systems()
IDS = ["epe", "pe-decoupled", "pe-coupled", "epe-uneven"]


def test_mesh_examples():
    m = build_mesh(pe_config(), (4, 4))
    assert m.n_nodes == 9
    assert m.nodes[4] == 1.0
    m = build_mesh(epe_config(), (2, 2, 2))
    np.testing.assert_array_equal(m.nodes, [0, 0.5, 1, 1.5, 2, 2.5, 3])
    with pytest.raises(MeshError):
        build_mesh(epe_config(), (3,))
    with pytest.raises(MeshError):
        build_mesh(pe_config(), (4, 0))


def test_interfaces_are_nodes():
    m = build_mesh(epe_config(), (3, 7, 5))
    for x in (1.0, 2.0):
        assert np.any(m.nodes == x)
    assert m.h == pytest.approx((1 / 3, 1 / 7, 1 / 5))


@pytest.mark.parametrize("sys_", SYSTEMS, ids=IDS)
def test_matrix_definiteness(sys_):
    M, K, D = (A.toarray() for A in (sys_.M, sys_.K, sys_.D))
    for A in (M, K, D):
        np.testing.assert_allclose(A, A.T, atol=1e-14)
    assert np.linalg.eigvalsh(M).min() > 0
    scale = np.abs(K).max()
    assert np.linalg.eigvalsh(K).min() > -1e-12 * scale
    assert np.linalg.eigvalsh(D).min() > -1e-12


@pytest.mark.parametrize("sys_", SYSTEMS, ids=IDS)
def test_kernel_of_stiffness(sys_):
    w = np.linalg.eigvalsh(sys_.K.toarray())
    tiny = int(np.sum(np.abs(w) < 1e-9 * np.abs(w).max()))
    assert tiny == (1 if sys_.variant is Variant.EPE else 0)
    if sys_.variant is Variant.EPE:
        assert np.abs(sys_.K @ sys_.e_p).max() < 1e-12


@pytest.mark.parametrize("sys_", SYSTEMS, ids=IDS)
def test_discrete_dissipativity(sys_):
    for _ in range(100):
        w = RNG.standard_normal(sys_.dim)
        lhs = energy_inner(sys_, apply_generator(sys_, w), w) + dissipation_rate(sys_, w)
        assert abs(lhs) <= 1e-12 * max(1.0, energy_norm_sq(sys_, w))


@pytest.mark.parametrize("sys_", SYSTEMS, ids=IDS)
def test_energy_basics(sys_):
    assert energy(sys_, np.zeros(sys_.dim)) == 0
    w = RNG.standard_normal(sys_.dim)
    assert energy(sys_, w) > 0
    with pytest.raises(DimensionMismatch):
        energy(sys_, np.zeros(sys_.dim + 1))
    if sys_.variant is Variant.EPE:
        const_p = np.concatenate([sys_.e_p, np.zeros(sys_.n)])
        assert abs(energy(sys_, const_p)) < 1e-12


@pytest.mark.parametrize("sys_", [s for s in SYSTEMS if s.variant is Variant.EPE], ids=["epe", "epe-uneven"])
def test_charge_mean_acceleration_vanishes(sys_):
    for _ in range(20):
        w = RNG.standard_normal(sys_.dim)
        acc = apply_generator(sys_, w)[sys_.n :]
        # e_p^T M acc is mu times the mean charge acceleration
        assert abs(sys_.e_p @ (sys_.M @ acc)) < 1e-10 * np.abs(acc).max()
        z = project_mean_zero(sys_, w)
        x, v = sys_.split(z)
        c = sys_.M @ sys_.e_p
        assert abs(c @ x) < 1e-12 * np.abs(x).max() and abs(c @ v) < 1e-12 * np.abs(v).max()


def test_damping_only_on_damped_layer():
    for sys_, (a, b) in ((SYSTEMS[0], (1.25, 1.75)), (SYSTEMS[1], (1.25, 1.75))):
        rows = np.unique(sys_.D.nonzero()[0])
        xs = sys_.coords[rows]
        h = sys_.mesh.h_min
        assert np.all((xs > a - h - 1e-12) & (xs < b + h + 1e-12))
        assert not np.isin(rows, sys_.fields["p"]).any()


@pytest.mark.parametrize("shape", ["indicator", "sampled"])
def test_damping_quadrature_exact(shape):
    samples = ((Fraction(11, 10), Fraction(1)), (Fraction(3, 2), Fraction(3)), (Fraction(19, 10), Fraction(1)))
    damp = DampingProfile(Fraction(6, 5), Fraction(9, 5), 1, shape, samples if shape == "sampled" else ())
    cfg = SystemConfig(MaterialParams(1, 2, 1, 1, 1), Geometry(Variant.PE, 1, 2), 1, damp)
    sys_ = assemble(cfg, build_mesh(cfg, (3, 7)))
    D = sys_.D.toarray()
    for i in sys_.fields["y"][:-1]:
        xi = sys_.coords[i]
        j = i + 1
        xa, xb = xi, sys_.coords[j]
        hat_i = lambda x: (xb - x) / (xb - xa)  # noqa: E731
        hat_j = lambda x: (x - xa) / (xb - xa)  # noqa: E731
        ref, _ = si.quad(lambda x: damp(x) * hat_i(x) * hat_j(x), xa, xb, points=list(damp.breakpoints()), limit=200)
        assert D[i, j] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("variant", ["EPE", "PE"])
def test_manufactured_linear_state(variant):
    # slopes matched by the flux balance: c1 u_x = alpha1 v_x = c2 y_x and p_x = gamma v_x
    mats = (2, 5, 3, 1, Fraction(1, 2))
    if variant == "EPE":
        cfg = epe_config(mats=mats, c1=3, c2=Fraction(1, 2))
        mesh = build_mesh(cfg, (6, 8, 5))
    else:
        cfg = pe_config(mats=mats, c2=Fraction(1, 2))
        mesh = build_mesh(cfg, (8, 6))
    sys_ = assemble(cfg, mesh)
    m = cfg.materials.f
    sv = 1.0
    flux = m.alpha1 * sv
    layers = [(float(a), float(b)) for a, b in cfg.geometry.layers]
    slopes = ([flux / float(cfg.c1), sv, flux / float(cfg.c2)] if variant == "EPE" else [sv, flux / float(cfg.c2)])

    def disp(x):
        val = 0.0
        for (a, b), s in zip(layers, slopes):
            if x <= b + 1e-15:
                return val + s * (x - a)
            val += s * (b - a)
        return val

    x = np.zeros(sys_.n)
    nd = sys_.n - len(sys_.fields["p"])
    x[:nd] = [disp(c) for c in sys_.coords[:nd]]
    pa = layers[1][0] if variant == "EPE" else 0.0
    x[sys_.fields["p"]] = m.gamma * sv * (sys_.coords[sys_.fields["p"]] - pa)
    r = sys_.K @ x
    # the last displacement dof also sees the Dirichlet node at L, where the linear state is nonzero
    r[nd - 1] = 0.0
    assert np.abs(r).max() < 1e-12


def test_sine_mode_energy_converges_second_order():
    cfg = epe_config()
    amp, omega = 1.3, 2.0
    l1 = 1.0
    exact = 0.25 * l1 * (omega**2 + float(cfg.c1) * (math.pi / l1) ** 2) * amp**2
    errs = []
    for n in (8, 16, 32, 64):
        sys_ = assemble(cfg, build_mesh(cfg, n))
        x = np.zeros(sys_.n)
        u = sys_.fields["u"]
        shape = amp * np.sin(math.pi * sys_.coords[u] / l1)
        x[u] = shape
        w = np.concatenate([x, omega * x])
        errs.append(abs(energy(sys_, w) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_norm_constants_worked_example():
    cfg = epe_config()
    assert c3_constant(cfg) == 2
    assert norm_equivalence_constants(cfg) == (Fraction(1, 5), Fraction(3))
    with pytest.raises(WrongVariant):
        norm_equivalence_constants(pe_config())


@pytest.mark.parametrize("t", [1, Fraction(3, 2), 4])
def test_norm_constant_scaling(t):
    # alpha scales with beta so that alpha1 keeps the same form
    base = epe_config()
    scaled = epe_config(mats=(t, 2 * t, t, 1, t), c1=t, c2=t)
    assert norm_equivalence_constants(scaled)[1] == t * norm_equivalence_constants(base)[1]


@pytest.mark.parametrize("sys_", [s for s in SYSTEMS if s.variant is Variant.EPE], ids=["epe", "epe-uneven"])
def test_discrete_norm_equivalence(sys_):
    C1, C2 = (float(c) for c in norm_equivalence_constants(sys_.config))
    for _ in range(100):
        w = project_mean_zero(sys_, RNG.standard_normal(sys_.dim))
        h2, s2 = energy_norm_sq(sys_, w), standard_norm_sq(sys_, w)
        assert C1 * s2 <= h2 * (1 + 1e-12)
        assert h2 <= C2 * s2 * (1 + 1e-12)


def test_standard_norm_refuses_pe():
    with pytest.raises(WrongVariant):
        standard_norm_sq(SYSTEMS[1], np.zeros(SYSTEMS[1].dim))


@pytest.mark.parametrize("sys_", SYSTEMS[:2], ids=IDS[:2])
def test_triplet_round_trip(sys_):
    for A in (sys_.M, sys_.K, sys_.D):
        text = export_triplets(A)
        assert text.splitlines()[0] == f"# {A.shape[0]} {A.shape[1]} {A.nnz}"
        B = read_triplets(text)
        assert (abs(A - B)).max() == 0


def test_reduced_operators_are_definite():
    Mr, Kr, Dr, Q = SYSTEMS[0].reduced()
    assert Q.shape == (SYSTEMS[0].n, SYSTEMS[0].n - 1)
    sla.cholesky(Kr.toarray())
    sla.cholesky(Mr.toarray())
    c = SYSTEMS[0].M @ SYSTEMS[0].e_p
    assert np.abs(c @ Q.toarray()).max() < 1e-12
