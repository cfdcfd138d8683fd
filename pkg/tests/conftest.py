from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from piezo_stab.params import DampingProfile, Geometry, MaterialParams, SystemConfig, Variant

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def rationals(lo=1, hi=20, den=6):
    return st.builds(Fraction, st.integers(lo, hi * den), st.integers(1, den)).filter(lambda q: q <= hi)


@st.composite
def materials(draw, coupled=None):
    """Admissible ``MaterialParams`` with small rational entries."""
    rho, beta, mu = (draw(rationals()) for _ in range(3))
    if coupled is None:
        coupled = draw(st.booleans())
    gamma = draw(rationals(1, 3)) if coupled else Fraction(0)
    alpha = gamma**2 * beta + draw(rationals())
    return MaterialParams(rho, alpha, beta, gamma, mu)


def epe_config(mats=(1, 2, 1, 1, 1), c1=1, c2=1, damp=(Fraction(5, 4), Fraction(7, 4), 1)):
    return SystemConfig(
        MaterialParams(*mats), Geometry(Variant.EPE, 1, 3, 2), c2, DampingProfile(*damp), c1=c1
    )


def pe_config(mats=(9, 1, 1, 0, 1), c2=1, damp=(Fraction(5, 4), Fraction(7, 4), 1), l1=1, L=2):
    return SystemConfig(MaterialParams(*mats), Geometry(Variant.PE, l1, L), c2, DampingProfile(*damp))


@pytest.fixture
def epe():
    return epe_config()


@pytest.fixture
def pe():
    return pe_config()


@pytest.fixture
def configs_dir():
    return CONFIGS
