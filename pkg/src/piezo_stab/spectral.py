"""Spectrum and energy-norm resolvent of the discrete generator.

On the zero-mean charge subspace the energy Gram matrix ``G = diag(K_r, M_r)``
is positive definite.  With Cholesky factors ``K_r = L_K L_K^T`` and
``M_r = L_M L_M^T`` the similarity ``B = diag(L_K^T, L_M^T) A diag(L_K^-T, L_M^-T)``
turns the energy norm into the Euclidean one:

    B = [[0, C], [-C^T, -L_M^-1 D_r L_M^-T]],    C = L_K^T L_M^-T,

which is skew-symmetric when ``D = 0``.  Hence
``||(i lam - A)^-1||_E = 1 / sigma_min(i lam - B)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotResonant, TooLarge
from .fem import DiscreteSystem
from .params import Variant

__all__ = [
    "DENSE_LIMIT",
    "SpectrumReport",
    "ResolventSweep",
    "energy_symmetrized_generator",
    "spectrum",
    "nearest_eigenvalues",
    "ResolventEvaluator",
    "resolvent_norm",
    "resolvent_sweep",
    "parse_grid",
]

DENSE_LIMIT = 6000


def _check_size(sys: DiscreteSystem):
    dim = 2 * sys.reduced()[0].shape[0]
    if dim > DENSE_LIMIT:
        raise TooLarge(f"state dimension {dim} exceeds the dense budget {DENSE_LIMIT}; use a coarser mesh")
    return dim


def energy_symmetrized_generator(sys: DiscreteSystem) -> np.ndarray:
    """Dense ``B`` (see module docstring)."""
    _check_size(sys)
    Mr, Kr, Dr, _ = sys.reduced()
    LK = np.linalg.cholesky(Kr.toarray())
    LM = np.linalg.cholesky(Mr.toarray())
    # C = L_K^T L_M^-T  <=>  C^T = L_M^-1 L_K
    Ct = sla.solve_triangular(LM, LK, lower=True)
    Dt = sla.solve_triangular(LM, sla.solve_triangular(LM, Dr.toarray(), lower=True).T, lower=True).T
    k = LK.shape[0]
    B = np.zeros((2 * k, 2 * k))
    B[:k, k:] = Ct.T
    B[k:, :k] = -Ct
    B[k:, k:] = -0.5 * (Dt + Dt.T)
    return B


@dataclass
class SpectrumReport:
    """Eigenvalues of the generator on the zero-mean charge subspace.

    ``resonance_matches`` holds ``(lambda_star, nearest eigenvalue, gap)``
    for each predicted resonance within the resolved frequency range.
    """

    eigenvalues: np.ndarray
    abscissa: float
    near_axis: list[tuple[complex, float]]
    resonance_matches: list[tuple[float, complex, float]] = field(default_factory=list)

    def to_csv(self) -> str:
        order = np.lexsort((self.eigenvalues.imag, self.eigenvalues.real))
        lines = ["re,im"] + [f"{z.real:.17g},{z.imag:.17g}" for z in self.eigenvalues[order]]
        return "\n".join(lines) + "\n"


def _resonance_matches(sys, eig, lam_max):
    from .characteristic import find_resonances
    from .diophantine import QuotientKind, classify_quotient

    cfg = sys.config
    if cfg.variant is not Variant.PE:
        return []
    if classify_quotient(cfg.materials).kind is not QuotientKind.RATIONAL_ODD_ODD:
        return []
    from .characteristic import sigma_pm

    sd = sigma_pm(cfg.materials)
    l1 = float(cfg.geometry.l1)
    # every witness with lambda* below lam_max
    n_max = int(lam_max * 2 * l1 * sd.sigma_plus / math.pi) + 1
    try:
        ws = find_resonances(cfg.materials, cfg.geometry.l1, n_max)
    except NotResonant:
        return []
    out = []
    for w in ws:
        if w.lambda_star > lam_max:
            continue
        z = eig[np.argmin(np.abs(eig - 1j * w.lambda_star))]
        out.append((w.lambda_star, complex(z), float(abs(z - 1j * w.lambda_star))))
    return out


def spectrum(sys: DiscreteSystem, near: int = 10) -> SpectrumReport:
    """Dense eigen-decomposition of the energy-symmetrised generator."""
    B = energy_symmetrized_generator(sys)
    eig = np.linalg.eigvals(B)
    order = np.argsort(-eig.real)
    eig = eig[order]
    near_axis = [(complex(z), float(-z.real)) for z in eig[:near]]
    # resonances are only trusted well inside the resolved band
    lam_max = 0.25 * float(np.max(np.abs(eig.imag)))
    return SpectrumReport(eig, float(eig.real.max()), near_axis, _resonance_matches(sys, eig, lam_max))


def _start_vector(n: int) -> np.ndarray:
    # fixed Arnoldi start so repeated runs give identical digits
    return np.random.default_rng(0).standard_normal(n).astype(complex)


def nearest_eigenvalues(sys: DiscreteSystem, target: complex, k: int = 1) -> np.ndarray:
    """``k`` eigenvalues closest to ``target`` by sparse shift-invert.

    Works with the pencil ``A' w = s H w``, ``A' = [[0, I], [-K, -D]]``,
    ``H = diag(I, M)``; solves with ``(A' - sigma H)`` reduce to the quadratic
    pencil ``K + sigma D + sigma^2 M``.
    """
    n = sys.n
    sigma = complex(target)
    P = (sys.K + sigma * sys.D + sigma * sigma * sys.M).tocsc().astype(complex)
    lu = spla.splu(P)
    M, D = sys.M, sys.D

    def matvec(w):
        w = np.asarray(w).ravel()
        b1 = w[:n]
        b2 = M @ w[n:]
        z1 = lu.solve(-b2 - (D @ b1 + sigma * (M @ b1)))
        z2 = b1 + sigma * z1
        return np.concatenate([z1, z2])

    op = spla.LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=complex)
    nu = spla.eigs(op, k=k, which="LM", return_eigenvectors=False, tol=1e-12, v0=_start_vector(2 * n))
    s = sigma + 1.0 / nu
    return s[np.argsort(np.abs(s - sigma))]


class ResolventEvaluator:
    """Energy-norm resolvent ``||(i lam - A)^-1||_E`` at many ``lam``.

    Works on the zero-mean charge subspace with sparse ``M_r, K_r, D_r``.
    ``(i lam - A) z = f`` reduces to the quadratic pencil

        (K - lam^2 M + i lam D) z1 = M f2 + (i lam M + D) f1,   z2 = i lam z1 - f1,

    and the squared norm is the top eigenvalue of ``G^-1 S^* G S`` with
    ``G = diag(K_r, M_r)``, found by Arnoldi with one sparse LU per ``lam``.
    """

    def __init__(self, sys: DiscreteSystem):
        self.dim = _check_size(sys)
        Mr, Kr, Dr, _ = sys.reduced()
        self.M, self.K, self.D = Mr.tocsc(), Kr.tocsc(), Dr.tocsc()
        self.k = Mr.shape[0]
        self.G = sp.block_diag([self.K, self.M], format="csc")
        self._Glu = spla.splu(self.G)
        self._eigs = None
        self._sys = sys

    @property
    def eigs(self) -> np.ndarray:
        """Generator eigenvalues (dense, computed on first use)."""
        if self._eigs is None:
            self._eigs = np.linalg.eigvals(energy_symmetrized_generator(self._sys))
        return self._eigs

    def _pencil_lu(self, lam: float):
        P = self.K - lam * lam * self.M + 1j * lam * self.D
        return spla.splu(P.tocsc().astype(complex))

    def invertible(self, lam: float) -> bool:
        try:
            lu = self._pencil_lu(lam)
        except RuntimeError:
            return False
        d = np.abs(lu.U.diagonal())
        return bool(d.min() > 1e-13 * d.max())

    def norm(self, lam: float) -> float:
        k, M, D, G = self.k, self.M, self.D, self.G
        il = 1j * lam
        try:
            lu = self._pencil_lu(lam)
        except RuntimeError:
            return math.inf

        def S(f):
            f1, f2 = f[:k], f[k:]
            z1 = lu.solve(M @ f2 + il * (M @ f1) + D @ f1)
            return np.concatenate([z1, il * z1 - f1])

        def SH(g):
            # Euclidean adjoint of S
            g1, g2 = g[:k], g[k:]
            w = lu.solve(g1 + np.conj(il) * g2, trans="H")
            return np.concatenate([np.conj(il) * (M @ w) + D @ w - g2, M @ w])

        n = 2 * k
        Glu = self._Glu

        def op(f):
            g = SH(G @ S(np.asarray(f).ravel()))
            return Glu.solve(g.real) + 1j * Glu.solve(g.imag)

        # G^-1 S^* G S is self-adjoint in the G inner product; its top eigenvalue is real
        lin = spla.LinearOperator((n, n), matvec=op, dtype=complex)
        top = spla.eigs(lin, k=1, which="LM", return_eigenvectors=False, tol=1e-10, v0=_start_vector(n))
        return math.sqrt(float(top[0].real))

    def dense_norm(self, lam: float) -> float:
        """Reference value from a full SVD of ``i lam - B``."""
        B = energy_symmetrized_generator(self._sys)
        s = np.linalg.svd(1j * lam * np.eye(B.shape[0]) - B, compute_uv=False)
        return 1.0 / s[-1]

    def distance_to_spectrum(self, lam: float) -> float:
        return float(np.min(np.abs(1j * lam - self.eigs)))


def resolvent_norm(sys: DiscreteSystem, lam: float) -> float:
    return ResolventEvaluator(sys).norm(lam)


@dataclass
class ResolventSweep:
    """``norms[k] = ||(i lambdas[k] - A)^-1||_E``; ``growth_exponent`` fits ``log norm ~ l log lam``."""

    lambdas: np.ndarray
    norms: np.ndarray
    growth_exponent: float
    perturbed: list[int]

    @property
    def sup(self) -> float:
        return float(np.max(self.norms))

    def to_csv(self) -> str:
        lines = ["lambda,norm"] + [f"{a:.17g},{b:.17g}" for a, b in zip(self.lambdas, self.norms)]
        return "\n".join(lines) + "\n"


def parse_grid(text: str) -> np.ndarray:
    """``"a:b:n"`` to ``n`` equispaced points on ``[a, b]``."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ValueError(f"grid must look like a:b:n (got {text!r})") from None
    if n < 1 or (n > 1 and not b > a):
        raise ValueError(f"grid needs n >= 1 and a < b (got {text!r})")
    return np.linspace(a, b, n)


def _fit_growth(lams, norms) -> float:
    pos = lams > 0
    lams, norms = lams[pos], norms[pos]
    if len(lams) < 2:
        return math.nan
    lo = 0.5 * (lams.min() + lams.max())
    sel = lams >= lo
    if sel.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(lams[sel]), np.log(norms[sel]), 1)
    return float(slope)


def resolvent_sweep(sys: DiscreteSystem, lambda_grid, jobs: int = 1) -> ResolventSweep:
    """Resolvent norms on a grid; grid points on an eigenvalue ordinate move by half a step."""
    ev = ResolventEvaluator(sys)
    lams = np.array(lambda_grid, dtype=float)
    step = float(np.min(np.diff(lams))) if len(lams) > 1 else 1.0
    perturbed = []
    for k, lam in enumerate(lams):
        if not ev.invertible(lam):
            lams[k] = lam + 0.5 * step
            perturbed.append(k)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            norms = np.array(list(pool.map(ev.norm, lams)))
    else:
        norms = np.array([ev.norm(lam) for lam in lams])
    return ResolventSweep(lams, norms, _fit_growth(lams, norms), perturbed)
