"""Command-line front end: special-function tables, spectra and parameter sweeps.

Exit codes: 0 success, 1 domain or numerical error, 2 usage error,
3 a guaranteed inequality was violated (an implementation bug).
Every output carries its RunConfig: JSON under the key "config", CSV as a
leading "# run_config: {...}" comment line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import annulus_spectrum as spectrum_mod
from . import eccentric_2d
from . import special_fn as sf
from .errors import DomainError, FracSpecError, InvariantViolation, ParameterError
from .radial_kernel import RadialGeometry

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3
CONFIG_PREFIX = "# run_config: "


class UsageError(Exception):
    """Flag combination that argparse cannot reject on its own."""


@dataclass
class RunConfig:
    """Validated parameter record of one invocation."""

    command: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        raw = json.loads(text)
        return cls(raw["command"], raw["params"])

    def validate(self) -> None:
        p = self.params
        if "N" in p and p["N"] is not None:
            if int(p["N"]) != p["N"] or p["N"] < 2:
                raise DomainError("N must be an integer >= 2")
        if "s" in p and p["s"] is not None and not 0.0 < p["s"] < 1.0:
            raise DomainError("s must lie in (0, 1)")
        if p.get("R") is not None and not p["R"] > 0.0:
            raise DomainError("R must be positive")
        if p.get("tau") is not None and not 0.0 < p["tau"] < 1.0:
            raise DomainError("tau must lie in (0, 1)")
        if p.get("n_mesh") is not None and p["n_mesh"] < 8:
            raise DomainError("n-mesh must be at least 8")
        if p.get("j_max") is not None and p["j_max"] < 2:
            raise DomainError("j-max must be at least 2")
        if p.get("l_max") is not None and p["l_max"] < 1:
            raise DomainError("l-max must be at least 1")
        if p.get("points") is not None and p["points"] < 3:
            raise DomainError("a sweep needs at least 3 points")
        if p.get("h") is not None and not 0.0 < p["h"] <= 0.25:
            raise DomainError("h must lie in (0, 0.25]")
        if p.get("workers") is not None and p["workers"] < 1:
            raise DomainError("workers must be positive")
        lo, hi = p.get("from"), p.get("to")
        if lo is not None and hi is not None and not lo < hi:
            raise DomainError("--from must be smaller than --to")


def read_run_config(text: str) -> RunConfig:
    """RunConfig embedded in a JSON or CSV output produced by this tool."""
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.startswith(CONFIG_PREFIX):
        return RunConfig.from_json(first[len(CONFIG_PREFIX):])
    raw = json.loads(text)
    return RunConfig(raw["config"]["command"], raw["config"]["params"])


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    raise TypeError(f"cannot serialize {type(value)!r}")


def _dump_json(config: RunConfig, payload: dict) -> str:
    return json.dumps({"config": asdict(config), **payload}, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _dump_csv(config: RunConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(CONFIG_PREFIX + config.to_json() + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# special


def cmd_special(args) -> int:
    config = RunConfig("special", {
        "N": args.N, "s": args.s, "quantities": _special_quantities(args),
        "t": args.t, "T": args.T, "rho": args.rho, "format": args.format,
    })
    if not config.params["quantities"]:
        raise UsageError("choose at least one of --psi --Psi --f --g --kappa --b")
    config.validate()
    params = sf.FractionalParams(args.N, args.s)
    tables: dict = {}
    scalars: dict = {}
    quantities = config.params["quantities"]
    if "psi" in quantities:
        t = args.t if args.t is not None else [0.0, 0.25, 0.5, 0.75, 1.0]
        tables["psi"] = {"t": t, "value": np.atleast_1d(sf.psi(params, t)).tolist()}
    if "Psi" in quantities:
        T = args.T if args.T is not None else [0.0, 0.125, 0.25, 0.375, 0.5]
        tables["Psi"] = {"T": T, "value": np.atleast_1d(sf.psi_big(params, T)).tolist()}
    if "f" in quantities:
        rho = args.rho if args.rho is not None else [0.5, 1.0, 2.0, 5.0, 10.0]
        tables["f"] = {"rho": rho, "value": np.atleast_1d(sf.f_rho(params, rho)).tolist()}
    if "g" in quantities:
        rho = args.rho if args.rho is not None else [1.5, 2.0, 5.0, 10.0]
        tables["g"] = {"rho": rho, "value": np.atleast_1d(sf.g_rho(params, rho)).tolist()}
    if "kappa" in quantities:
        scalars["kappa"] = params.kappa
    if "b" in quantities:
        scalars["b"] = params.b
        scalars["b_one"] = sf.b_one(params.s)

    if args.format == "json":
        _emit(_dump_json(config, {"tables": tables, "scalars": scalars}), args.out)
    elif args.format == "csv":
        rows = []
        for name, tab in tables.items():
            arg_name = next(k for k in tab if k != "value")
            rows.extend((name, arg_name, x, v) for x, v in zip(tab[arg_name], tab["value"]))
        rows.extend((name, "", "", v) for name, v in scalars.items())
        _emit(_dump_csv(config, ("quantity", "argument", "at", "value"), rows), args.out)
    else:
        lines = []
        for name, tab in tables.items():
            arg_name = next(k for k in tab if k != "value")
            lines.append(f"{arg_name:>12} {name:>22}")
            lines.extend(f"{x:12.6g} {v:22.15g}" for x, v in zip(tab[arg_name], tab["value"]))
        lines.extend(f"{name} = {v!r}" for name, v in scalars.items())
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _special_quantities(args) -> list[str]:
    return [q for q in ("psi", "Psi", "f", "g", "kappa", "b") if getattr(args, f"q_{q}")]


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(args) -> int:
    mode = "interval" if args.interval else ("R" if args.R is not None else ("tau" if args.tau is not None else None))
    if mode is None:
        raise UsageError("choose one of --interval, --R or --tau")
    config = RunConfig("spectrum", {
        "mode": mode, "N": None if mode == "interval" else args.N, "s": args.s, "R": args.R, "tau": args.tau,
        "n_mesh": args.n_mesh, "j_max": args.j_max, "l_max": args.l_max, "format": args.format,
    })
    config.validate()
    if mode == "interval":
        payload = _interval_payload(args)
    else:
        payload = _annulus_payload(args, mode)
    if args.format == "json":
        _emit(_dump_json(config, payload), args.out)
    else:
        rows = [(r["j"], r["lambda"], r["q_inner"], r["q_outer"]) for r in payload["radial"]]
        _emit(_dump_csv(config, ("j", "lambda", "q_inner", "q_outer"), rows), args.out)
    return EXIT_OK


def _interval_payload(args) -> dict:
    pairs = spectrum_mod.interval_pairs(args.s, args.j_max, args.n_mesh)
    radial = [{"j": j + 1, "lambda": p.lam, "q_inner": p.q_inner, "q_outer": p.q_outer,
               "low_confidence": p.low_confidence} for j, p in enumerate(pairs)]
    return {
        "radial": radial,
        "ordered": bool(all(a.lam < b.lam for a, b in zip(pairs, pairs[1:]))),
        "second_sign_product": pairs[1].q_inner * pairs[1].q_outer,
        "second_changes_sign": bool(pairs[1].q_inner * pairs[1].q_outer < 0.0),
    }


def _annulus_payload(args, mode: str) -> dict:
    params = sf.FractionalParams(args.N, args.s)
    if mode == "R":
        geometry = RadialGeometry.annulus(args.N, args.R, args.R + 1.0)
    else:
        geometry = RadialGeometry.annulus(args.N, args.tau, 1.0)
    pairs = spectrum_mod.radial_pairs(args.N, params, geometry, args.j_max, args.n_mesh)
    full = spectrum_mod.full_spectrum(params, geometry, args.l_max, args.j_max, args.n_mesh)
    test = spectrum_mod.nonradiality_test(params, geometry, args.n_mesh)
    radial = [{"j": j + 1, "lambda": p.lam, "q_inner": p.q_inner, "q_outer": p.q_outer,
               "low_confidence": p.low_confidence} for j, p in enumerate(pairs)]
    payload = {
        "radial": radial,
        "full_spectrum": [{"lambda": e.lam, "l": e.l, "j": e.j, "multiplicity": e.multiplicity}
                          for e in full.entries],
        "truncated": full.truncated,
        "lambda2_full": full.second,
        "nonradial": test.nonradial,
        "nonradiality": {"state": test.state, "gap": test.gap, "tol_gap": test.tol_gap, "n": test.n,
                         "lambda2_radial": test.lambda2_radial, "lambda1_next_dim": test.lambda1_next},
        "sign_product": pairs[1].q_inner * pairs[1].q_outer,
        "sign_passes": bool(pairs[1].q_inner * pairs[1].q_outer < 0.0),
    }
    if mode == "tau":
        payload["scaling"] = spectrum_mod.scaling_check(params, args.tau, args.n_mesh)
    return payload


# ---------------------------------------------------------------------------
# sweep


def _grid(lo: float, hi: float, points: int, spacing: str) -> list[float]:
    if spacing == "geometric":
        if lo <= 0.0:
            raise DomainError("geometric spacing needs a positive start")
        return np.geomspace(lo, hi, points).tolist()
    return np.linspace(lo, hi, points).tolist()


def cmd_sweep(args) -> int:
    workers = args.workers if args.workers is not None else spectrum_mod.default_workers()
    if args.parameter == "a":
        return _sweep_a(args, workers)
    spacing = args.spacing or ("geometric" if args.parameter == "R" else "linear")
    config = RunConfig("sweep", {
        "parameter": args.parameter, "N": args.N, "s": args.s, "from": args.lo, "to": args.hi,
        "points": args.points, "spacing": spacing, "n_mesh": args.n_mesh, "workers": workers,
        "format": args.format,
    })
    config.validate()
    if args.parameter == "tau" and not (0.0 < args.lo and args.hi < 1.0):
        raise DomainError("tau sweep bounds must lie in (0, 1)")
    grid = _grid(args.lo, args.hi, args.points, spacing)
    report = spectrum_mod.sweep(sf.FractionalParams(args.N, args.s), args.parameter, grid, n=args.n_mesh,
                                workers=workers)
    return _write_report(config, report, args)


def _sweep_a(args, workers: int) -> int:
    config = RunConfig("sweep", {
        "parameter": "a", "tau": args.tau, "s": args.s, "points": args.points, "h": args.h,
        "from": args.lo, "to": args.hi, "workers": workers, "format": args.format,
    })
    if args.tau is None:
        raise UsageError("sweep a needs --tau")
    config.validate()
    lo = 0.0 if args.lo is None else args.lo
    hi = 0.75 * (1.0 - args.tau) if args.hi is None else args.hi
    grid = _grid(lo, hi, args.points, "linear")
    report = eccentric_2d.sweep_a(args.tau, args.s, grid, h=args.h, workers=workers)
    return _write_report(config, report, args)


def _write_report(config: RunConfig, report, args) -> int:
    if args.format == "json":
        payload = json.loads(report.to_json())
        _emit(_dump_json(config, {"report": payload}), args.out)
    else:
        rows = [[rec.get(c) for c in report.columns] for rec in report.records]
        text = _dump_csv(config, report.columns, rows)
        if report.threshold:
            text += f"# empirical_threshold: {json.dumps(report.threshold, default=_jsonable)}\n"
        if report.verdicts:
            text += f"# verdicts: {json.dumps(report.verdicts, sort_keys=True, default=_jsonable)}\n"
        _emit(text, args.out)
    if report.violations:
        sys.stderr.write("invariant violated: " + "; ".join(report.violations) + "\n")
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("special", help="tables of psi, Psi, f, g and the constants kappa, b")
    for q in ("psi", "Psi", "f", "g", "kappa", "b"):
        sp.add_argument(f"--{q}", dest=f"q_{q}", action="store_true")
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--s", type=float, default=0.5)
    sp.add_argument("--t", type=_float_list)
    sp.add_argument("--T", type=_float_list)
    sp.add_argument("--rho", type=_float_list)
    sp.add_argument("--format", choices=("text", "csv", "json"), default="text")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_special)

    sp = sub.add_parser("spectrum", help="radial spectra of an annulus or of the unit interval")
    which = sp.add_mutually_exclusive_group()
    which.add_argument("--interval", action="store_true")
    which.add_argument("--R", type=float, help="shell R < |x| < R+1")
    which.add_argument("--tau", type=float, help="B_1 minus the closed ball of radius tau")
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--s", type=float, default=0.5)
    sp.add_argument("--n-mesh", dest="n_mesh", type=int, default=spectrum_mod.DEFAULT_MESH)
    sp.add_argument("--j-max", dest="j_max", type=int, default=4)
    sp.add_argument("--l-max", dest="l_max", type=int, default=3)
    sp.add_argument("--format", choices=("csv", "json"), default="json")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("sweep", help="sweeps in R, tau or the obstacle position a")
    kinds = sp.add_subparsers(dest="parameter", required=True)
    for name in ("R", "tau"):
        kp = kinds.add_parser(name)
        kp.add_argument("--N", type=int, default=2)
        kp.add_argument("--s", type=float, default=0.5)
        kp.add_argument("--from", dest="lo", type=float, required=True)
        kp.add_argument("--to", dest="hi", type=float, required=True)
        kp.add_argument("--points", type=int, default=8)
        kp.add_argument("--spacing", choices=("linear", "geometric"))
        kp.add_argument("--n-mesh", dest="n_mesh", type=int, default=spectrum_mod.DEFAULT_MESH)
        _common_sweep(kp)
    kp = kinds.add_parser("a")
    kp.add_argument("--tau", type=float, required=True)
    kp.add_argument("--s", type=float, default=0.5)
    kp.add_argument("--points", type=int, default=5)
    kp.add_argument("--h", type=float, default=0.05)
    kp.add_argument("--from", dest="lo", type=float)
    kp.add_argument("--to", dest="hi", type=float)
    _common_sweep(kp)
    sp.set_defaults(func=cmd_sweep)
    return parser


def _common_sweep(kp) -> None:
    kp.add_argument("--workers", type=int, help="parallel jobs (default: $FRACSPEC_WORKERS or 1)")
    kp.add_argument("--format", choices=("csv", "json"), default="csv")
    kp.add_argument("--out")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"fracspec: error: {exc}\n")
        return EXIT_USAGE
    except InvariantViolation as exc:
        sys.stderr.write(f"invariant violated: {exc}\n")
        return EXIT_INVARIANT
    except (FracSpecError, ParameterError) as exc:
        sys.stderr.write(f"fracspec: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
