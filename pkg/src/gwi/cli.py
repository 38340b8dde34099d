"""Command-line driver.

Exit codes: 0 success, 1 reproduction mismatch, 64 usage error,
65 domain/validation error, 70 internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import reproduce as repro
from .errors import GWIError, NumericalError, ValidationError
from .expression import (
    PROBABILITY,
    build_gwi,
    build_wigner_original,
    evaluate,
    expand_to_correlators,
    render_text,
    to_json as expr_to_json,
)
from .lhv import Behavior, behavior_from_state, jpd_feasible, lhv_argmax, verify_marginal_identity
from .observables import (
    cluster_reduced_settings,
    ghz_reduced_settings,
    plane_setting,
    setting_set_from_angles,
    setting_set_from_bloch,
    setting_set_from_flat,
    w_reduced_settings,
)
from .optimize import REDUCED, FullObjective, OptimizerConfig, maximize, visibility_threshold
from .qstate import MixedState, PureState, add_white_noise, make_cluster4, make_ghz, make_singlet, make_w

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_SOFTWARE = 70

VIOLATION_TOL = 1e-9
DEFAULT_PLANES = {"ghz": "XY", "cluster4": "XZ", "w": "XZ", "singlet": "XZ", "mixed": "XZ", "file": "XZ"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- argument helpers -------------------------------------------------------

def _state_kind(spec: str) -> str:
    return spec.split(":", 1)[0]


def load_state(spec: str, n: int | None):
    """``ghz|cluster4|w|singlet|mixed|file:PATH``, optionally ``NAME:v`` for white noise."""
    if spec.startswith("file:"):
        return _load_state_file(Path(spec[5:]))
    name, _, vis = spec.partition(":")
    if name == "mixed":
        if vis and float(vis) != 0.0:
            raise UsageError("'mixed' is the maximally mixed state; use NAME:v for other visibilities")
        return MixedState.maximally_mixed(4 if n is None else n)
    if name == "ghz":
        psi = make_ghz(4 if n is None else n)
    elif name == "w":
        psi = make_w(4 if n is None else n)
    elif name == "cluster4":
        if n not in (None, 4):
            raise ValidationError("cluster4 is a 4-qubit state")
        psi = make_cluster4()
    elif name == "singlet":
        if n not in (None, 2):
            raise ValidationError("the singlet is a 2-qubit state")
        psi = make_singlet()
    else:
        raise UsageError(f"unknown state {spec!r}")
    if vis:
        return add_white_noise(psi, float(vis))
    return psi


def _load_state_file(path: Path):
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read state file {path}: {exc}") from exc

    def cplx(v):
        return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

    if "amplitudes" in data:
        return PureState(np.array([cplx(v) for v in data["amplitudes"]]))
    if "density_matrix" in data:
        return MixedState(np.array([[cplx(v) for v in row] for row in data["density_matrix"]]))
    raise ValidationError("state file needs 'amplitudes' or 'density_matrix'")


def _angles(values, degrees: bool):
    vals = [float(v) for v in values]
    return [math.radians(v) for v in vals] if degrees else vals


def load_settings(args, n: int, plane: str, wigner: bool = False):
    if wigner:
        if args.angles is None or len(args.angles) != 3:
            raise UsageError("the Wigner expression needs --angles A B C (three shared directions)")
        dirs = tuple(plane_setting(plane, phi) for phi in _angles(args.angles, args.degrees))
        return [dirs, dirs]
    sources = [s for s in ("angles", "settings", "ghz_reduced", "cluster_reduced", "w_reduced")
               if getattr(args, s, None) is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one of --angles, --settings, --ghz-reduced, --cluster-reduced, --w-reduced")
    src = sources[0]
    if src == "angles":
        return setting_set_from_flat(plane, _angles(args.angles, args.degrees))
    if src == "ghz_reduced":
        return ghz_reduced_settings(*_angles(args.ghz_reduced, args.degrees), n=n)
    if src == "cluster_reduced":
        return cluster_reduced_settings(*_angles(args.cluster_reduced, args.degrees))
    if src == "w_reduced":
        return w_reduced_settings(*_angles(args.w_reduced, args.degrees))
    try:
        data = json.loads(Path(args.settings).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read settings file: {exc}") from exc
    if "bloch_pairs" in data:
        return setting_set_from_bloch(data["bloch_pairs"])
    if "pairs" not in data:
        raise ValidationError("settings file needs 'pairs' or 'bloch_pairs'")
    pairs = [_angles(p, args.degrees) for p in data["pairs"]]
    return setting_set_from_angles(data.get("plane", plane), pairs)


def _flip_mask(text: str | None, n: int):
    if text is None:
        return None
    if len(text) != n or set(text) - {"0", "1"}:
        raise UsageError(f"--flip needs a {n}-character 0/1 mask")
    return [c == "1" for c in text]


def _config(args) -> OptimizerConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file: {exc}") from exc
    for key in ("restarts", "seed", "tol", "max_iters"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    base.setdefault("seed", 42)
    return OptimizerConfig.from_json(base)


def _plane(args, state_spec: str) -> str:
    if getattr(args, "plane", None):
        return args.plane.upper()
    return DEFAULT_PLANES.get(_state_kind(state_spec), "XZ")


def _settings_json(settings) -> list:
    return [[[float(v) for v in obs.bloch] for obs in party] for party in settings]


# -- commands ---------------------------------------------------------------

def cmd_evaluate(args) -> dict:
    state = load_state(args.state, args.n)
    n = state.n_parties
    wigner = args.expr == "wigner"
    if wigner:
        expr = build_wigner_original()
    else:
        expr = build_gwi(n, _flip_mask(args.flip, n))
    if args.form == "correlator":
        expr = expand_to_correlators(expr)
    settings = load_settings(args, n, _plane(args, args.state), wigner)
    value = evaluate(expr, state, settings)
    bound = float(expr.bound)
    return {
        "value": value,
        "bound": bound,
        "violated": bool(value > bound + VIOLATION_TOL),
        "expression": render_text(expr),
        "settings": _settings_json(settings),
    }


def cmd_optimize(args) -> dict:
    config = _config(args)
    if args.objective in REDUCED:
        objective = REDUCED[args.objective]
    elif args.objective == "full":
        state = load_state(args.state, args.n)
        if not isinstance(state, PureState):
            raise ValidationError("full optimization needs a pure state")
        plane = getattr(args, "plane", None) or config.plane or DEFAULT_PLANES.get(_state_kind(args.state), "XZ")
        objective = FullObjective(state, plane)
    else:
        raise UsageError(f"unknown objective {args.objective!r}")
    return maximize(objective, config).to_json()


def cmd_visibility(args) -> dict:
    config = _config(args)
    state = load_state(args.state, args.n)
    if not isinstance(state, PureState):
        raise ValidationError("visibility needs a pure state")
    plane = getattr(args, "plane", None) or config.plane or DEFAULT_PLANES.get(_state_kind(args.state), "XZ")
    res = visibility_threshold(state, plane=plane, config=config)
    if res.bracket.get("checked") and not res.bracket.get("ok"):
        raise NumericalError(f"visibility bracketing check failed: {res.bracket}")
    return {"state": args.state, "plane": plane.upper(), **res.to_json()}


def cmd_lhv(args) -> dict:
    if args.lhv_command == "bound":
        if args.expr == "wigner":
            expr = build_wigner_original()
        else:
            if args.n is None:
                raise UsageError("lhv bound needs --n")
            expr = build_gwi(args.n, _flip_mask(args.flip, args.n))
        if args.form == "correlator":
            expr = expand_to_correlators(expr)
        value, strategy = lhv_argmax(expr)
        return {
            "expression": render_text(expr),
            "form": expr.form,
            "n": expr.n_parties,
            "bound": str(value),
            "stated_bound": str(expr.bound),
            "maximizer": {"index": strategy.index, "outcomes": list(strategy.outcomes)},
        }
    if args.lhv_command == "identity":
        rec = verify_marginal_identity(args.n)
        return {"n": rec.n, "nonneg": rec.all_nonneg, "count": rec.residual_count,
                "expected": rec.n * 2**rec.n, "support": rec.support}
    # jpd
    if args.behavior:
        try:
            behavior = Behavior.from_json(Path(args.behavior).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read behavior file: {exc}") from exc
    else:
        if not args.state:
            raise UsageError("lhv jpd needs --behavior FILE or --state with settings")
        state = load_state(args.state, args.n)
        settings = load_settings(args, state.n_parties, _plane(args, args.state))
        behavior = behavior_from_state(state, settings)
    return jpd_feasible(behavior, tolerance=args.tolerance).to_json()


def _report(command: str, args, outputs: dict, t0: float) -> dict:
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None}
    return {
        "command": command,
        "inputs": inputs,
        "outputs": outputs,
        "timings": {"total_ms": round(1000 * (time.perf_counter() - t0), 3)},
        "versions": __version__,
    }


def _emit(report: dict):
    print(json.dumps(report, indent=2, sort_keys=True))


def cmd_reproduce(args) -> int:
    t0 = time.perf_counter()
    result = repro.run(seed=args.seed, restarts_full=args.restarts)
    rows = result["rows"]
    if args.format == "csv":
        sys.stdout.write(repro.to_csv(rows))
    elif args.format == "markdown":
        sys.stdout.write(repro.to_markdown(rows))
    else:
        timings = dict(result.pop("timings"))
        report = _report("reproduce", args, result, t0)
        report["timings"].update(timings)
        _emit(report)
    if not result["passed"]:
        sys.stderr.write(repro.diff_table(rows))
        return EXIT_MISMATCH
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_state(p, required=True):
    p.add_argument("--state", required=required,
                   help="ghz | cluster4 | w | singlet | mixed | file:PATH; append :v for white noise")
    p.add_argument("--n", type=int, help="number of parties (ghz, w, mixed)")


def _add_settings(p):
    p.add_argument("--plane", type=str.upper, choices=["XY", "XZ"])
    p.add_argument("--angles", nargs="+", type=float, help="phi_1 phi'_1 phi_2 phi'_2 ...")
    p.add_argument("--settings", help="JSON settings file")
    p.add_argument("--ghz-reduced", nargs=2, type=float, metavar=("ALPHA", "BETA"))
    p.add_argument("--cluster-reduced", nargs=2, type=float, metavar=("PHI1", "PHI1P"))
    p.add_argument("--w-reduced", nargs=5, type=float, metavar=("PHI1P", "PHI2", "PHI2P", "PHI3", "PHI3P"))
    p.add_argument("--degrees", action="store_true", help="angles on the command line are in degrees")


def _add_config(p):
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--config", help="optimizer config JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwi", description="Generalized Wigner inequality toolkit")
    parser.add_argument("--version", action="version", version=f"gwi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="evaluate GWI (or Wigner's inequality) on a state")
    _add_state(p)
    _add_settings(p)
    p.add_argument("--form", choices=["probability", "correlator"], default="correlator")
    p.add_argument("--expr", choices=["gwi", "wigner"], default="gwi")
    p.add_argument("--flip", help="outcome sign-flip mask, e.g. 01")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="maximize the GWI value over angles")
    p.add_argument("--objective", required=True, help="ghz-reduced | cluster-reduced | w-reduced | full")
    _add_state(p, required=False)
    p.add_argument("--plane", type=str.upper, choices=["XY", "XZ", "SPHERE", "BLOCH"])
    _add_config(p)
    p.set_defaults(func=cmd_optimize, state="ghz")

    p = sub.add_parser("lhv", help="local hidden variable oracles")
    lsub = p.add_subparsers(dest="lhv_command", required=True, parser_class=_Parser)
    q = lsub.add_parser("bound", help="exact local bound by strategy enumeration")
    q.add_argument("--n", type=int)
    q.add_argument("--form", choices=["probability", "correlator"], default="correlator")
    q.add_argument("--expr", choices=["gwi", "wigner"], default="gwi")
    q.add_argument("--flip")
    q = lsub.add_parser("identity", help="marginal decomposition identity")
    q.add_argument("--n", type=int, required=True)
    q = lsub.add_parser("jpd", help="joint probability distribution feasibility")
    q.add_argument("--behavior", help="behavior JSON file")
    _add_state(q, required=False)
    _add_settings(q)
    q.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_lhv)

    p = sub.add_parser("visibility", help="white-noise threshold visibility")
    _add_state(p)
    p.add_argument("--plane", type=str.upper, choices=["XY", "XZ", "SPHERE", "BLOCH"])
    _add_config(p)
    p.set_defaults(func=cmd_visibility)

    p = sub.add_parser("reproduce", help="reproduce the quadripartite results table")
    p.add_argument("--format", choices=["json", "csv", "markdown"], default="json")
    p.add_argument("--seed", type=int, default=repro.DEFAULT_SEED)
    p.add_argument("--restarts", type=int, help="restarts for the full-plane optimizations")
    p.set_defaults(func=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args)
        t0 = time.perf_counter()
        outputs = args.func(args)
        _emit(_report(args.command if args.command != "lhv" else f"lhv {args.lhv_command}", args, outputs, t0))
        return EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gwi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gwi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except (GWIError, ValueError) as exc:
        print(f"gwi: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except ArithmeticError as exc:
        print(f"gwi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
