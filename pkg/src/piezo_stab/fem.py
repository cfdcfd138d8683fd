"""P1 Galerkin discretisation of the E/P/E and P/E transmission systems.

Unknowns are nodal values of one continuous displacement field over ``[0, L]``
(``u``, ``v``, ``y`` share interface nodes) and the charge ``p`` on the piezo
layer.  The interface transmission conditions are natural for this weak form,
so no penalty or ghost terms appear.  With positions ``x`` and velocities
``v`` the semi-discrete system reads

    M x'' + D x' + K x = 0,

and the discrete energy ``E = (v^T M v + x^T K x) / 2`` satisfies
``dE/dt = -v^T D v`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, MeshError, WrongVariant
from .params import SystemConfig, Variant

__all__ = [
    "Mesh",
    "DiscreteSystem",
    "build_mesh",
    "assemble",
    "energy",
    "energy_norm_sq",
    "standard_norm_sq",
    "apply_generator",
    "energy_inner",
    "dissipation_rate",
    "project_mean_zero",
    "norm_equivalence_constants",
    "export_triplets",
    "read_triplets",
    "c3_constant",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class Mesh:
    """Conforming 1D mesh; every interface is a node.

    ``layer_nodes[k]`` is the ``(first, last)`` global node index of layer ``k``.
    """

    nodes: np.ndarray
    counts: tuple[int, ...]
    layer_nodes: tuple[tuple[int, int], ...]
    h: tuple[float, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def h_min(self) -> float:
        return min(self.h)


def build_mesh(config: SystemConfig, n_per_layer) -> Mesh:
    """Uniform partition of every layer into ``n_per_layer[k]`` elements.

    A single integer is broadcast to all layers.
    """
    layers = config.geometry.layers
    if np.isscalar(n_per_layer):
        n_per_layer = (int(n_per_layer),) * len(layers)
    counts = tuple(int(n) for n in n_per_layer)
    if len(counts) != len(layers):
        raise MeshError(f"{config.variant.value} has {len(layers)} layers, got {len(counts)} element counts")
    if any(n < 1 for n in counts):
        raise MeshError(f"element counts must be >= 1 (got {counts})")
    pieces, spans, hs = [], [], []
    first = 0
    for (a, b), n in zip(layers, counts):
        a, b = float(a), float(b)
        xs = np.linspace(a, b, n + 1)
        pieces.append(xs if first == 0 else xs[1:])
        spans.append((first, first + n))
        hs.append((b - a) / n)
        first += n
    return Mesh(np.concatenate(pieces), counts, tuple(spans), tuple(hs))


@dataclass
class DiscreteSystem:
    """Assembled operators on the free degrees of freedom.

    Positions are ordered ``[displacement nodes 1..N-1, charge nodes]``.
    ``fields`` maps ``"u"``, ``"v"``, ``"y"``, ``"p"`` to position indices
    (interface displacement dofs belong to both adjacent fields).
    ``e_p`` is the constant-charge vector; for E/P/E it spans ``ker K`` and
    ``e_p^T M x`` is the charge mean times ``mu``.
    """

    config: SystemConfig
    mesh: Mesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    D: sp.csr_matrix
    fields: dict[str, np.ndarray]
    coords: np.ndarray
    e_p: np.ndarray
    _Mlu: object = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        """State dimension (positions and velocities)."""
        return 2 * self.n

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def split(self, w):
        w = np.asarray(w)
        if w.shape != (self.dim,):
            raise DimensionMismatch(f"state has shape {w.shape}, expected ({self.dim},)")
        return w[: self.n], w[self.n :]

    def solve_M(self, b):
        if self._Mlu is None:
            self._Mlu = spla.splu(self.M.tocsc())
        return self._Mlu.solve(np.asarray(b))

    def mean_basis(self) -> sp.csr_matrix:
        """Basis ``Q`` of ``{x : e_p^T M x = 0}`` (identity for P/E).

        The zero-mean charge subspace is invariant under the dynamics and
        removes the energy-neutral constant-charge mode from ``ker K``.
        """
        if self.variant is Variant.PE:
            return sp.identity(self.n, format="csr")
        c = self.M @ self.e_p
        j = int(self.fields["p"][0])
        keep = np.array([i for i in range(self.n) if i != j])
        rows = list(keep) + [j] * len(keep)
        cols = list(range(len(keep))) + list(range(len(keep)))
        vals = [1.0] * len(keep) + list(-c[keep] / c[j])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n - 1))

    def reduced(self):
        """``(M_r, K_r, D_r, Q)`` restricted to the zero-mean charge subspace."""
        Q = self.mean_basis()
        Qt = Q.T.tocsr()
        return (Qt @ self.M @ Q).tocsr(), (Qt @ self.K @ Q).tocsr(), (Qt @ self.D @ Q).tocsr(), Q


def _element_mats(h):
    Ke = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    Me = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
    return Ke, Me


def _damping_element(profile, x0, x1):
    """``int_{x0}^{x1} d(x) phi_i phi_j`` by 3-point Gauss on smooth pieces."""
    cuts = [x0] + [b for b in profile.breakpoints() if x0 < b < x1] + [x1]
    De = np.zeros((2, 2))
    h = x1 - x0
    for a, b in zip(cuts, cuts[1:]):
        xq = 0.5 * (a + b) + 0.5 * (b - a) * _GAUSS_X
        wq = 0.5 * (b - a) * _GAUSS_W
        d = profile(xq)
        phi = np.vstack([(x1 - xq) / h, (xq - x0) / h])
        De += (phi * (wq * d)) @ phi.T
    return De


def assemble(config: SystemConfig, mesh: Mesh, damping: bool = True) -> DiscreteSystem:
    """Mass, stiffness and damping matrices from the energy quadratic forms.

    ``damping=False`` drops ``D`` (the conservative system).
    """
    f = config.materials.f
    N = mesh.n_nodes - 1  # last node index
    nd = N - 1  # displacement dofs: nodes 1..N-1
    piezo_k = 1 if config.variant is Variant.EPE else 0
    pa, pb = mesh.layer_nodes[piezo_k]
    p_nodes = np.arange(pa, pb + 1)
    if config.variant is Variant.PE:
        p_nodes = p_nodes[1:]  # p(0) = 0
    n_p = len(p_nodes)
    n = nd + n_p

    def wdof(node):
        return node - 1 if 0 < node < N else -1

    p_index = {int(node): nd + i for i, node in enumerate(p_nodes)}

    def pdof(node):
        return p_index.get(int(node), -1)

    if config.variant is Variant.EPE:
        speeds = [float(config.c1), None, float(config.c2)]
    else:
        speeds = [None, float(config.c2)]
    damped_k = 1
    rows, cols, mv, kv, dv = [], [], [], [], []

    def add(dofs_r, dofs_c, Mb, Kb, Db):
        for a in range(2):
            for b in range(2):
                r, c = dofs_r[a], dofs_c[b]
                if r < 0 or c < 0:
                    continue
                rows.append(r)
                cols.append(c)
                mv.append(Mb[a, b])
                kv.append(Kb[a, b])
                dv.append(Db[a, b])

    zero = np.zeros((2, 2))
    for k, (first, last) in enumerate(mesh.layer_nodes):
        h = mesh.h[k]
        Ke, Me = _element_mats(h)
        for e in range(first, last):
            x0, x1 = mesh.nodes[e], mesh.nodes[e + 1]
            wd = (wdof(e), wdof(e + 1))
            De = _damping_element(config.damping, x0, x1) if (damping and k == damped_k) else zero
            if k == piezo_k:
                pd = (pdof(e), pdof(e + 1))
                add(wd, wd, f.rho * Me, f.alpha * Ke, De)
                add(wd, pd, zero, -f.beta * f.gamma * Ke, zero)
                add(pd, wd, zero, -f.beta * f.gamma * Ke, zero)
                add(pd, pd, f.mu * Me, f.beta * Ke, zero)
            else:
                add(wd, wd, Me, speeds[k] * Ke, De)

    def mat(vals):
        A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        A.eliminate_zeros()
        return A

    M, K, D = mat(mv), mat(kv), mat(dv)

    fields = {}
    names = ["u", "v", "y"] if config.variant is Variant.EPE else ["v", "y"]
    for name, (first, last) in zip(names, mesh.layer_nodes):
        idx = [wdof(i) for i in range(first, last + 1)]
        fields[name] = np.array([i for i in idx if i >= 0], dtype=int)
    fields["p"] = np.arange(nd, n)
    coords = np.concatenate([mesh.nodes[1:N], mesh.nodes[p_nodes]])
    e_p = np.zeros(n)
    e_p[fields["p"]] = 1.0
    return DiscreteSystem(config, mesh, M, K, D, fields, coords, e_p)


def energy(sys: DiscreteSystem, state) -> float:
    """``(vel^T M vel + pos^T K pos) / 2``."""
    x, v = sys.split(state)
    return 0.5 * float(v @ (sys.M @ v) + x @ (sys.K @ x))


def energy_norm_sq(sys: DiscreteSystem, state) -> float:
    """``||U||_H^2 = 2 E``."""
    return 2.0 * energy(sys, state)


def apply_generator(sys: DiscreteSystem, state) -> np.ndarray:
    """``A_d w = (vel, -M^{-1}(K pos + D vel))``."""
    x, v = sys.split(state)
    return np.concatenate([v, -sys.solve_M(sys.K @ x + sys.D @ v)])


def energy_inner(sys: DiscreteSystem, w1, w2) -> float:
    x1, v1 = sys.split(w1)
    x2, v2 = sys.split(w2)
    return float(x1 @ (sys.K @ x2) + v1 @ (sys.M @ v2))


def dissipation_rate(sys: DiscreteSystem, state) -> float:
    """``vel^T D vel``."""
    _, v = sys.split(state)
    return float(v @ (sys.D @ v))


def project_mean_zero(sys: DiscreteSystem, state) -> np.ndarray:
    """Remove the charge mean from positions and velocities (E/P/E only)."""
    w = np.array(state, dtype=float)
    if sys.variant is Variant.PE:
        return w
    x, v = sys.split(w)
    c = sys.M @ sys.e_p
    scale = float(c @ sys.e_p)
    x -= (c @ x) / scale * sys.e_p
    v -= (c @ v) / scale * sys.e_p
    return w


def _field_forms(sys: DiscreteSystem):
    """Unit stiffness and mass forms restricted to each field's layer."""
    mesh = sys.mesh
    n = sys.n
    names = ["u", "v", "y"] if sys.variant is Variant.EPE else ["v", "y"]
    disp_layer = dict(zip(names, range(len(names))))
    out = {}
    N = mesh.n_nodes - 1
    piezo_k = 1 if sys.variant is Variant.EPE else 0
    pa = mesh.layer_nodes[piezo_k][0]
    p_off = 1 if sys.variant is Variant.PE else 0

    def dof(name, node):
        if name == "p":
            i = node - pa - p_off
            return sys.fields["p"][0] + i if i >= 0 else -1
        return node - 1 if 0 < node < N else -1

    for name in names + ["p"]:
        k = piezo_k if name == "p" else disp_layer[name]
        first, last = mesh.layer_nodes[k]
        Ke, Me = _element_mats(mesh.h[k])
        r, c, kv, mv = [], [], [], []
        for e in range(first, last):
            d = (dof(name, e), dof(name, e + 1))
            for a in range(2):
                for b in range(2):
                    if d[a] >= 0 and d[b] >= 0:
                        r.append(d[a])
                        c.append(d[b])
                        kv.append(Ke[a, b])
                        mv.append(Me[a, b])
        out[name] = (
            sp.csr_matrix((kv, (r, c)), shape=(n, n)),
            sp.csr_matrix((mv, (r, c)), shape=(n, n)),
        )
    return out


def standard_norm_sq(sys: DiscreteSystem, state) -> float:
    """Discrete standard norm: every gradient and velocity in ``L^2``, plus ``||v||^2``.

    E/P/E only; the P/E space carries its own analogue of the norm.
    """
    if sys.variant is not Variant.EPE:
        raise WrongVariant("the standard norm comparison is defined for E/P/E")
    x, v = sys.split(state)
    forms = _field_forms(sys)
    pos = forms["u"][0] + forms["v"][0] + forms["v"][1] + forms["p"][0] + forms["y"][0]
    # interface dofs are shared by two layers; the velocity mass is the plain L^2 form
    vel = forms["u"][1] + forms["v"][1] + forms["y"][1] + forms["p"][1]
    return float(x @ (pos @ x) + v @ (vel @ v))


def norm_equivalence_constants(config: SystemConfig) -> tuple[Fraction, Fraction]:
    """Exact ``(C1, C2)`` with ``C1 ||U||_s^2 <= ||U||_H^2 <= C2 ||U||_s^2`` (E/P/E)."""
    if config.variant is not Variant.EPE:
        raise WrongVariant("norm-equivalence constants are stated for E/P/E")
    m = config.materials
    g = config.geometry
    c1, c2 = config.c1, config.c2
    l1, l2 = g.l1, g.l2
    c3 = 2 * (l2 - l1) * max(l1, l2 - l1)
    C2 = max(c1, Fraction(1), m.alpha1 + 2 * m.beta * max(m.gamma**2, Fraction(1)), m.mu, m.rho, c2)
    C1 = 1 / max(
        Fraction(1),
        (1 + c3) / c1,
        (1 + 2 * m.gamma**2 + c3) / m.alpha1,
        1 / m.rho,
        2 / m.beta,
        1 / m.mu,
        1 / c2,
    )
    return C1, C2


def c3_constant(config: SystemConfig) -> Fraction:
    g = config.geometry
    return 2 * (g.l2 - g.l1) * max(g.l1, g.l2 - g.l1)


def export_triplets(A) -> str:
    """``row col value`` lines (0-based, 17 significant digits), header ``# n_rows n_cols nnz``."""
    A = sp.coo_matrix(A)
    order = np.lexsort((A.col, A.row))
    lines = [f"# {A.shape[0]} {A.shape[1]} {A.nnz}"]
    lines += [f"{A.row[i]} {A.col[i]} {A.data[i]:.17g}" for i in order]
    return "\n".join(lines) + "\n"


def read_triplets(text: str) -> sp.csr_matrix:
    lines = text.strip().splitlines()
    nr, nc, _ = (int(t) for t in lines[0].lstrip("#").split())
    data = np.array([ln.split() for ln in lines[1:]], dtype=float).reshape(-1, 3)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc))
