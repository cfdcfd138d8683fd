"""Material parameters, geometry, damping profiles and the config file format.

All numbers are held as exact :class:`fractions.Fraction` values with a float
mirror for the numerics.  The plain-text config format is a flat ``key = value``
list; rationals are written ``p/q``.
"""

from __future__ import annotations

import enum
import math
from collections import namedtuple
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError, InvalidParameters

__all__ = [
    "Variant",
    "MaterialParams",
    "Geometry",
    "DampingProfile",
    "SystemConfig",
    "ValidationReport",
    "validate",
    "to_fraction",
    "parse_config",
    "load_config",
    "dump_config",
    "config_from_mapping",
    "CONFIG_KEYS",
]


def to_fraction(value) -> Fraction:
    """Convert ints, fractions, ``"p/q"`` / decimal strings and floats exactly.

    Floats go through their shortest ``repr`` so that ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational number: {value!r}") from exc
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


class Variant(enum.Enum):
    EPE = "EPE"
    PE = "PE"


FloatParams = namedtuple("FloatParams", "rho alpha beta gamma mu alpha1")


@dataclass(frozen=True)
class MaterialParams:
    """Piezoelectric constants (rho, alpha, beta, gamma, mu).

    Construction fails unless ``alpha1 = alpha - gamma**2 * beta > 0``.
    ``gamma == 0`` is admitted; the layer is then flagged :attr:`decoupled`.
    """

    rho: Fraction
    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    mu: Fraction
    f: FloatParams = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("rho", "alpha", "beta", "gamma", "mu"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        problems = _material_violations(self.rho, self.alpha, self.beta, self.gamma, self.mu)
        if problems:
            raise InvalidParameters("; ".join(problems))
        object.__setattr__(
            self,
            "f",
            FloatParams(*(float(x) for x in (self.rho, self.alpha, self.beta, self.gamma, self.mu, self.alpha1))),
        )

    @property
    def alpha1(self) -> Fraction:
        return self.alpha - self.gamma**2 * self.beta

    @property
    def decoupled(self) -> bool:
        return self.gamma == 0

    def as_tuple(self):
        return (self.rho, self.alpha, self.beta, self.gamma, self.mu)


def _material_violations(rho, alpha, beta, gamma, mu):
    out = []
    for name, val in (("rho", rho), ("alpha", alpha), ("beta", beta), ("mu", mu)):
        if val <= 0:
            out.append(f"{name} must be > 0 (got {val})")
    if gamma < 0:
        out.append(f"gamma must be >= 0 (got {gamma})")
    if beta > 0:
        a1 = alpha - gamma**2 * beta
        if a1 <= 0:
            out.append(f"alpha1 = alpha - gamma^2*beta must be > 0 (got {a1})")
    return out


@dataclass(frozen=True)
class Geometry:
    """Interface coordinates.  EPE: ``0 < l1 < l2 < L``; PE: ``0 < l1 < L``."""

    variant: Variant
    l1: Fraction
    L: Fraction
    l2: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "l1", to_fraction(self.l1))
        object.__setattr__(self, "L", to_fraction(self.L))
        if self.l2 is not None:
            object.__setattr__(self, "l2", to_fraction(self.l2))
        problems = _geometry_violations(self.variant, self.l1, self.l2, self.L)
        if problems:
            raise InvalidParameters("; ".join(problems))

    @property
    def layers(self) -> tuple[tuple[Fraction, Fraction], ...]:
        if self.variant is Variant.EPE:
            return ((Fraction(0), self.l1), (self.l1, self.l2), (self.l2, self.L))
        return ((Fraction(0), self.l1), (self.l1, self.L))

    @property
    def piezo_layer(self) -> tuple[Fraction, Fraction]:
        return self.layers[1] if self.variant is Variant.EPE else self.layers[0]

    @property
    def damped_layer(self) -> tuple[Fraction, Fraction]:
        # EPE damps the piezo layer, PE damps the elastic layer.
        return self.layers[1]


def _geometry_violations(variant, l1, l2, L):
    if variant is Variant.EPE:
        if l2 is None:
            return ["EPE geometry needs l2"]
        if not (0 < l1 < l2 < L):
            return [f"EPE geometry needs 0 < l1 < l2 < L (got l1={l1}, l2={l2}, L={L})"]
    else:
        if not (0 < l1 < L):
            return [f"PE geometry needs 0 < l1 < L (got l1={l1}, L={L})"]
    return []


@dataclass(frozen=True)
class DampingProfile:
    """Viscous damping ``d(x)`` on the damped layer.

    ``shape="indicator"`` means ``d = d0`` on ``(a, b)`` and zero elsewhere.
    ``shape="sampled"`` interpolates ``samples`` (pairs ``(x, d)``) linearly and
    is zero outside the sampled range.
    """

    a: Fraction
    b: Fraction
    d0: Fraction
    shape: str = "indicator"
    samples: tuple[tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "a", to_fraction(self.a))
        object.__setattr__(self, "b", to_fraction(self.b))
        object.__setattr__(self, "d0", to_fraction(self.d0))
        object.__setattr__(
            self, "samples", tuple((to_fraction(x), to_fraction(d)) for x, d in self.samples)
        )
        problems = _damping_shape_violations(self)
        if problems:
            raise InvalidParameters("; ".join(problems))

    def __call__(self, x):
        """Evaluate ``d`` at ``x`` (array-like)."""
        x = np.asarray(x, dtype=float)
        if self.shape == "indicator":
            inside = (x > float(self.a)) & (x < float(self.b))
            return np.where(inside, float(self.d0), 0.0)
        xs = np.array([float(s[0]) for s in self.samples])
        ds = np.array([float(s[1]) for s in self.samples])
        return np.interp(x, xs, ds, left=0.0, right=0.0)

    def breakpoints(self) -> np.ndarray:
        """Abscissae where ``d`` may be non-smooth."""
        if self.shape == "indicator":
            return np.array([float(self.a), float(self.b)])
        return np.array([float(s[0]) for s in self.samples])


def _damping_shape_violations(p: DampingProfile):
    out = []
    if p.shape not in ("indicator", "sampled"):
        return [f"damp.shape must be 'indicator' or 'sampled' (got {p.shape!r})"]
    if p.d0 <= 0:
        out.append(f"damp.d0 must be > 0 (got {p.d0})")
    if not p.a < p.b:
        out.append(f"damping support needs a < b (got a={p.a}, b={p.b})")
    if p.shape == "sampled":
        xs = [s[0] for s in p.samples]
        if len(xs) < 2:
            out.append("sampled damping needs at least two samples")
            return out
        if any(x1 >= x2 for x1, x2 in zip(xs, xs[1:])):
            out.append("damping samples must have strictly increasing x")
        if any(d < 0 for _, d in p.samples):
            out.append("damping samples must be >= 0")
        if not (xs[0] <= p.a and p.b <= xs[-1]):
            out.append("damping samples must cover the support (a, b)")
            return out
        # piecewise linear: the infimum over (a, b) sits at a, b or an inner node
        probe = [p.a, p.b] + [x for x in xs if p.a < x < p.b]
        lowest = min(_interp_exact(p.samples, x) for x in probe)
        if lowest < p.d0:
            out.append(f"sampled damping dips to {lowest} < d0 = {p.d0} on (a, b)")
    return out


def _interp_exact(samples, x):
    for (x0, d0), (x1, d1) in zip(samples, samples[1:]):
        if x0 <= x <= x1:
            return d0 + (d1 - d0) * (x - x0) / (x1 - x0)
    return Fraction(0)


@dataclass(frozen=True)
class SystemConfig:
    """One transmission system: materials, geometry, outer speeds and damping.

    ``c1`` is only meaningful for EPE.  The damping sits on the piezo layer for
    EPE and on the elastic layer for PE.
    """

    materials: MaterialParams
    geometry: Geometry
    c2: Fraction
    damping: DampingProfile
    c1: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "c2", to_fraction(self.c2))
        if self.c1 is not None:
            object.__setattr__(self, "c1", to_fraction(self.c1))
        problems = _system_violations(self.geometry, self.c1, self.c2, self.damping)
        if problems:
            raise InvalidParameters("; ".join(problems))

    @property
    def variant(self) -> Variant:
        return self.geometry.variant


def _system_violations(geom: Geometry, c1, c2, damp: DampingProfile):
    out = []
    if geom.variant is Variant.EPE:
        if c1 is None or c1 <= 0:
            out.append(f"c1 must be > 0 for EPE (got {c1})")
    if c2 is None or c2 <= 0:
        out.append(f"c2 must be > 0 (got {c2})")
    lo, hi = geom.damped_layer
    if not (lo < damp.a and damp.b < hi):
        where = "piezo layer (l1, l2)" if geom.variant is Variant.EPE else "elastic layer (l1, L)"
        out.append(f"damping support ({damp.a}, {damp.b}) must lie strictly inside the {where} = ({lo}, {hi})")
    return out


@dataclass
class ValidationReport:
    violations: list[str]
    alpha1: Fraction | None = None
    decoupled: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations


CONFIG_KEYS = (
    "variant",
    "rho",
    "alpha",
    "beta",
    "gamma",
    "mu",
    "c1",
    "c2",
    "l1",
    "l2",
    "L",
    "damp.a",
    "damp.b",
    "damp.d0",
    "damp.shape",
    "damp.samples",
)


def validate(config) -> ValidationReport:
    """Collect every violated constraint without raising.

    ``config`` is a :class:`SystemConfig` or a raw ``key -> value`` mapping as
    produced by :func:`parse_config`.
    """
    if isinstance(config, SystemConfig):
        m = config.materials
        return ValidationReport([], alpha1=m.alpha1, decoupled=m.decoupled)
    raw = dict(config)
    out: list[str] = []

    def num(key, required=True):
        if key not in raw or raw[key] in (None, ""):
            if required:
                out.append(f"missing key {key!r}")
            return None
        try:
            return to_fraction(raw[key])
        except (TypeError, ValueError) as exc:
            out.append(f"{key}: {exc}")
            return None

    try:
        variant = Variant(str(raw.get("variant", "")).strip().upper().replace("/", ""))
    except ValueError:
        out.append(f"variant must be EPE or PE (got {raw.get('variant')!r})")
        variant = None

    rho, alpha, beta, gamma, mu = (num(k) for k in ("rho", "alpha", "beta", "gamma", "mu"))
    alpha1 = None
    if None not in (rho, alpha, beta, gamma, mu):
        out.extend(_material_violations(rho, alpha, beta, gamma, mu))
        alpha1 = alpha - gamma**2 * beta
    l1, L = num("l1"), num("L")
    l2 = num("l2", required=variant is Variant.EPE)
    c1 = num("c1", required=variant is Variant.EPE)
    c2 = num("c2")
    a, b, d0 = num("damp.a"), num("damp.b"), num("damp.d0")
    shape = str(raw.get("damp.shape", "indicator")).strip()

    geom = None
    if variant is not None and None not in (l1, L):
        problems = _geometry_violations(variant, l1, l2, L)
        out.extend(problems)
        if not problems:
            geom = Geometry(variant, l1, L, l2 if variant is Variant.EPE else None)
    damp = None
    if None not in (a, b, d0):
        try:
            samples = _parse_samples(raw.get("damp.samples", "")) if shape == "sampled" else ()
            damp = DampingProfile(a, b, d0, shape, samples)
        except (InvalidParameters, ValueError) as exc:
            out.extend(str(exc).split("; "))
    if geom is not None and damp is not None:
        out.extend(_system_violations(geom, c1, c2, damp))
    elif geom is not None:
        if c2 is not None and c2 <= 0:
            out.append(f"c2 must be > 0 (got {c2})")
    decoupled = gamma == 0 if gamma is not None else False
    return ValidationReport(out, alpha1=alpha1, decoupled=decoupled)


def _parse_samples(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    pairs = []
    for chunk in str(text).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            x, d = chunk.split(":")
        except ValueError as exc:
            raise ValueError(f"damp.samples entries look like x:d (got {chunk!r})") from exc
        pairs.append((to_fraction(x), to_fraction(d)))
    return tuple(pairs)


def _fmt(q: Fraction) -> str:
    q = to_fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_config(text: str) -> dict[str, str]:
    """Parse the flat ``key = value`` format.  ``#`` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        if key not in ("variant", "damp.shape", "damp.samples"):
            try:
                to_fraction(value)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno) from None
        raw[key] = value
    return raw


def config_from_mapping(raw: Mapping[str, object]) -> SystemConfig:
    report = validate(raw)
    if not report.ok:
        raise InvalidParameters("; ".join(report.violations))
    variant = Variant(str(raw["variant"]).strip().upper().replace("/", ""))
    mats = MaterialParams(*(raw[k] for k in ("rho", "alpha", "beta", "gamma", "mu")))
    geom = Geometry(variant, raw["l1"], raw["L"], raw["l2"] if variant is Variant.EPE else None)
    shape = str(raw.get("damp.shape", "indicator")).strip()
    samples = _parse_samples(raw.get("damp.samples", "")) if shape == "sampled" else ()
    damp = DampingProfile(raw["damp.a"], raw["damp.b"], raw["damp.d0"], shape, samples)
    c1 = raw.get("c1") if variant is Variant.EPE else None
    return SystemConfig(mats, geom, raw["c2"], damp, c1=c1)


def load_config(path) -> SystemConfig:
    return config_from_mapping(parse_config(Path(path).read_text()))


def dump_config(cfg: SystemConfig) -> str:
    """Canonical serialization (fixed key order, exact rationals)."""
    m, g, d = cfg.materials, cfg.geometry, cfg.damping
    lines = [f"variant = {g.variant.value}"]
    for key, val in zip(("rho", "alpha", "beta", "gamma", "mu"), m.as_tuple()):
        lines.append(f"{key} = {_fmt(val)}")
    if cfg.c1 is not None:
        lines.append(f"c1 = {_fmt(cfg.c1)}")
    lines.append(f"c2 = {_fmt(cfg.c2)}")
    lines.append(f"l1 = {_fmt(g.l1)}")
    if g.l2 is not None:
        lines.append(f"l2 = {_fmt(g.l2)}")
    lines.append(f"L = {_fmt(g.L)}")
    lines += [f"damp.a = {_fmt(d.a)}", f"damp.b = {_fmt(d.b)}", f"damp.d0 = {_fmt(d.d0)}", f"damp.shape = {d.shape}"]
    if d.shape == "sampled":
        lines.append("damp.samples = " + ", ".join(f"{_fmt(x)}:{_fmt(v)}" for x, v in d.samples))
    return "\n".join(lines) + "\n"
