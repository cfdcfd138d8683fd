"""Command-line front end.

Subcommands ``classify``, ``simulate``, ``spectrum``, ``resolvent``, ``modes``
and ``validate``.  CSV outputs use fixed column orders and 17 significant
digits.  With ``--out DIR`` every run also writes ``manifest.json``.

Exit codes: 0 on success, otherwise the ``exit_code`` of the raised error
(see :mod:`piezo_stab.errors`); argument errors exit with 2.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .characteristic import find_resonances, lift_resonant_mode, sigma_pm
from .diophantine import QuotientKind, classify_quotient, decay_prediction, parity_verdict
from .dynamics import default_dt, fit_decay, generic_initial_state, integrate, lifted_resonant_state
from .errors import DegenerateTrace, InvalidParameters, NotResonant, PiezoStabError
from .fem import assemble, build_mesh
from .params import SystemConfig, config_from_mapping, dump_config, parse_config, validate
from .spectral import parse_grid, resolvent_sweep, spectrum


@dataclass
class RunManifest:
    subcommand: str
    config_path: str
    config_sha256: str
    parameters: str
    settings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _read_config(path) -> tuple[SystemConfig, str]:
    text = Path(path).read_text()
    cfg = config_from_mapping(parse_config(text))
    return cfg, hashlib.sha256(text.encode()).hexdigest()


def _mesh_arg(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh must look like n1[,n2[,n3]] (got {text!r})") from None
    return vals[0] if len(vals) == 1 else vals


class _Output:
    """Collects named outputs; writes files under ``--out`` or prints to stdout."""

    def __init__(self, args, cfg, digest):
        self.dir = Path(args.out) if args.out else None
        self.manifest = RunManifest(
            args.command, str(args.config), digest, dump_config(cfg) if cfg is not None else ""
        )

    def emit(self, name: str, text: str, primary: bool = True):
        if self.dir is None:
            if primary:
                sys.stdout.write(text)
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / name).write_text(text)
        self.manifest.outputs.append(name)

    def finish(self):
        if self.dir is not None:
            (self.dir / "manifest.json").write_text(self.manifest.to_json())


# --------------------------------------------------------------------------
# classify


def _resonance_text(n_plus: int, l1) -> str:
    k = 2 * n_plus + 1
    head = "π" if k == 1 else f"{k}π"
    return f"{head}/(2σ₊)" if l1 == 1 else f"{head}/(2·{l1}·σ₊)"


def classify_report(cfg: SystemConfig) -> str:
    m, l1 = cfg.materials, cfg.geometry.l1
    cls = classify_quotient(m)
    verdict = decay_prediction(cls)
    if cls.kind is QuotientKind.RATIONAL_ODD_ODD:
        verdict = parity_verdict(cls.xi_plus, cls.xi_minus, m, l1)
    rational = cls.kind in (QuotientKind.RATIONAL_ODD_ODD, QuotientKind.RATIONAL_MIXED_PARITY)
    head = [cls.label() if rational else cls.kind.value, verdict.describe()]
    if verdict.resonances:
        w0 = verdict.resonances[0]
        head.append(f"resonance λ*={_resonance_text(w0.n_plus, l1)}")
    sd = sigma_pm(m)
    lines = ["; ".join(head)]
    lines.append(f"sigma_plus={sd.sigma_plus:.17g}")
    lines.append(f"sigma_minus={sd.sigma_minus:.17g}")
    lines.append(f"sigma_plus_sq={sd.sigma_plus_sq}")
    lines.append(f"sigma_minus_sq={sd.sigma_minus_sq}")
    lines.append(f"quotient={sd.quotient:.17g}")
    lines.append(f"class={cls.kind.value}")
    lines.append(f"quotient_class={cls.label()}")
    lines.append(f"regime={verdict.regime.value}")
    if verdict.rate is not None:
        lines.append(f"rate={verdict.rate}")
        lines.append(f"varpi={verdict.varpi}")
    for w in verdict.resonances:
        lines.append(f"witness={w.n_plus},{w.n_minus} lambda_star={w.lambda_star:.17g}")
    if not verdict.resonances:
        for wp, wm in verdict.witnesses:
            lines.append(f"witness={wp},{wm}")
    return "\n".join(lines) + "\n"


def cmd_classify(args, cfg, out):
    out.emit("classify.txt", classify_report(cfg))


# --------------------------------------------------------------------------
# simulate / spectrum / resolvent / modes


def _system(args, cfg):
    mesh = build_mesh(cfg, args.mesh)
    return assemble(cfg, mesh)


def _first_witness(cfg, nmax):
    ws = find_resonances(cfg.materials, cfg.geometry.l1, nmax)
    if not ws:
        raise NotResonant(f"no resonance with n+, n- <= {nmax}")
    return ws[0]


def cmd_simulate(args, cfg, out):
    sys_ = _system(args, cfg)
    dt = args.dt if args.dt is not None else default_dt(sys_)
    if args.init == "resonant":
        w0 = lifted_resonant_state(sys_, _first_witness(cfg, args.nmax))
    else:
        w0 = generic_initial_state(sys_)
    trace = integrate(sys_, w0, dt, args.horizon, record_every=args.record_every)
    out.manifest.settings.update(
        mesh=args.mesh, dt=dt, horizon=args.horizon, init=args.init, model=args.model, record_every=args.record_every
    )
    out.emit("energy_trace.csv", trace.to_csv(), primary=False)
    summary = (
        f"trace,E(T)/E(0),{trace.ratio[-1]:.17g}\n"
        f"trace,max_increase,{trace.max_increase():.17g}\n"
        f"trace,identity_residual,{trace.identity_residual:.17g}\n"
    )
    try:
        fit = fit_decay(trace, args.model)
    except DegenerateTrace:
        # a non-decaying trace is still a result; report it, then signal the failed fit
        out.emit("decay_report.csv", "model,param,value\n" + summary)
        out.finish()
        raise
    out.emit("decay_report.csv", fit.to_csv() + summary)


def cmd_spectrum(args, cfg, out):
    rep = spectrum(_system(args, cfg))
    out.manifest.settings.update(mesh=args.mesh)
    out.emit("spectrum.csv", rep.to_csv())
    if rep.resonance_matches:
        lines = ["lambda_star,re,im,gap"] + [
            f"{ls:.17g},{z.real:.17g},{z.imag:.17g},{g:.17g}" for ls, z, g in rep.resonance_matches
        ]
        out.emit("resonance_matches.csv", "\n".join(lines) + "\n", primary=False)


def cmd_resolvent(args, cfg, out):
    if args.grid is None:
        raise InvalidParameters("resolvent needs --grid a:b:n")
    sweep = resolvent_sweep(_system(args, cfg), args.grid, jobs=args.jobs)
    out.manifest.settings.update(
        mesh=args.mesh, grid=args.grid_text, jobs=args.jobs, growth_exponent=sweep.growth_exponent,
        perturbed=sweep.perturbed,
    )
    out.emit("resolvent.csv", sweep.to_csv())


def cmd_modes(args, cfg, out):
    m, l1 = cfg.materials, cfg.geometry.l1
    ws = find_resonances(m, l1, args.nmax)
    xs = np.linspace(0.0, float(l1), args.points)
    lines = ["n_plus,n_minus,lambda_star,x,v,p"]
    for w in ws:
        v, p = lift_resonant_mode(w, m, xs)
        lines += [
            f"{w.n_plus},{w.n_minus},{w.lambda_star:.17g},{x:.17g},{a:.17g},{b:.17g}" for x, a, b in zip(xs, v, p)
        ]
    out.manifest.settings.update(nmax=args.nmax, points=args.points)
    out.emit("modes.csv", "\n".join(lines) + "\n")


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="piezo-stab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="flat key = value configuration file")
        s.add_argument("--out", help="output directory (default: primary output to stdout)")
        return s

    common("classify", "quotient class and predicted decay regime")
    common("validate", "report every violated parameter constraint")
    for name, help_ in (
        ("simulate", "integrate and fit the energy decay"),
        ("spectrum", "eigenvalues of the discrete generator"),
        ("resolvent", "energy-norm resolvent sweep along the imaginary axis"),
    ):
        s = common(name, help_)
        s.add_argument("--mesh", type=_mesh_arg, default=50, help="elements per layer, n1[,n2[,n3]]")
        if name == "simulate":
            s.add_argument("--dt", type=float, help="time step (default h_min / (2 c_max))")
            s.add_argument("--horizon", type=float, default=50.0)
            s.add_argument("--init", choices=("generic", "resonant"), default="generic")
            s.add_argument("--model", choices=("exponential", "polynomial"), default="exponential")
            s.add_argument("--record-every", type=int, default=1)
            s.add_argument("--nmax", type=int, default=10, help="witness search bound for --init resonant")
        if name == "resolvent":
            s.add_argument("--grid", type=str, help="a:b:n")
            s.add_argument("--jobs", type=int, default=1)
    s = common("modes", "resonant eigenmodes on the piezo layer")
    s.add_argument("--nmax", type=int, default=10)
    s.add_argument("--points", type=int, default=201)
    return p


COMMANDS = {
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "resolvent": cmd_resolvent,
    "modes": cmd_modes,
}


def _validate(args) -> int:
    raw = parse_config(Path(args.config).read_text())
    report = validate(raw)
    text = "ok\n" if report.ok else "".join(f"violation: {v}\n" for v in report.violations)
    if report.ok and report.decoupled:
        text += "note: gamma = 0, the charge decouples from the displacement\n"
    sys.stdout.write(text)
    return 0 if report.ok else InvalidParameters.exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "grid", None) is not None:
        args.grid_text = args.grid
        try:
            args.grid = parse_grid(args.grid)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        if args.command == "validate":
            return _validate(args)
        cfg, digest = _read_config(args.config)
        out = _Output(args, cfg, digest)
        COMMANDS[args.command](args, cfg, out)
        out.finish()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PiezoStabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
