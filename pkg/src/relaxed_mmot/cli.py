"""Command-line entry point: ``relaxed-mmot {cost,stratify,potential,quantize}``.

Exit codes: 0 ok, 1 input error, 2 certificate failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dual, lp, potential, primal, quantize
from .cost import kernel_from_tag
from .measures import MeasureError, measure_from_json

EXIT_OK, EXIT_INPUT, EXIT_CERT, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {"N": 2, "kernel": "coulomb", "lp_tol": 1e-6, "gap_tol": 1e-8,
            "iter_tol": 1e-6, "max_iters": 500, "format": "json", "workers": None,
            "measure": None, "potential": None, "grid": None, "z_grid": None,
            "out": None, "trace": None, "verbose": 0}


class InputError(Exception):
    pass


class CertificateFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


@dataclass
class RunConfig:
    command: str
    N: int
    kernel: str
    lp_tol: float
    gap_tol: float
    iter_tol: float
    max_iters: int
    format: str
    workers: int
    measure: str | None = None
    potential: str | None = None
    grid: str | None = None
    z_grid: str | None = None
    out: str | None = None
    trace: str | None = None
    verbose: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.N < 2:
            raise InputError("--N must be at least 2")
        for name in ("lp_tol", "gap_tol", "iter_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        if self.max_iters < 0:
            raise InputError("--max-iters must be nonnegative")
        if self.format not in ("json", "csv"):
            raise InputError("--format must be json or csv")


# ---------------------------------------------------------------------------
# serialisation

def _plain(obj):
    """Convert to JSON-ready values; floats become exact 17-digit tokens."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return _Num(x)
    return obj


class _Num(float):
    pass


def dumps(obj) -> str:
    def enc(o, indent=0):
        pad = "  " * (indent + 1)
        end = "  " * indent
        if isinstance(o, _Num):
            return format(float(o), ".17g")
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, indent + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, indent + 1) for v in o) + "\n" + end + "]"
        return json.dumps(o)
    return enc(_plain(obj)) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parsing helpers

def _load_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: invalid JSON ({exc})") from None


def _load_measure(cfg: RunConfig):
    if not cfg.measure:
        raise InputError("--measure is required")
    try:
        return measure_from_json(_load_json(cfg.measure, "measure"))
    except MeasureError as exc:
        raise InputError(f"{cfg.measure}: {exc}") from None


def parse_grid(spec: str, dim: int | None = None):
    """``"lo1,hi1,...;res"`` (res may be one integer or one per axis)."""
    try:
        box_s, res_s = spec.split(";")
        nums = [float(x) for x in box_s.split(",")]
        res = [int(x) for x in res_s.split(",")]
    except ValueError:
        raise InputError(f"--grid {spec!r}: expected 'lo,hi[,lo,hi...];res'") from None
    if len(nums) % 2 or not nums:
        raise InputError("--grid needs a lo,hi pair per axis")
    d = len(nums) // 2
    if dim is not None and d != dim:
        raise InputError(f"--grid has {d} axes but the measure has dimension {dim}")
    if len(res) == 1:
        res = res * d
    if len(res) != d or any(r < 2 for r in res):
        raise InputError("--grid resolution must be at least 2 per axis")
    box = [(nums[2 * i], nums[2 * i + 1]) for i in range(d)]
    try:
        return potential.GridFunction.zeros(box, res)
    except ValueError as exc:
        raise InputError(f"--grid: {exc}") from None


def parse_z_grid(spec: str) -> np.ndarray:
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"--z-grid {spec!r}: expected 'start:stop:steps'") from None
    if n < 1 or a <= 0 or b < a:
        raise InputError("--z-grid needs 0 < start <= stop and steps >= 1")
    return np.linspace(a, b, n)


def _load_potential(path: str):
    data = _load_json(path, "potential")
    try:
        if isinstance(data, dict) and "shape" in data:
            return potential.GridFunction.from_json(data)
        return dual.DualPotential.from_json(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: not a potential ({exc})") from None


# ---------------------------------------------------------------------------
# commands

def cmd_cost(cfg: RunConfig) -> int:
    rho = _load_measure(cfg)
    kern = kernel_from_tag(cfg.kernel)
    value, plan = primal.relaxed_cost(rho, cfg.N, kern)
    out = {"command": "cost", "N": cfg.N, "kernel": kern.tag, "mass": rho.total_mass}
    if math.isinf(value):
        out.update(primal_value=value, dual_value=float("inf"), gap=0.0,
                   reason="some atom carries more than 1/N of the mass, so every "
                          "plan stacks it on itself")
        _emit(dumps(out), cfg.out)
        return EXIT_OK
    dval, u = dual.dual_lp(rho, cfg.N, kern)
    gap = abs(value - dval)
    out.update(primal_value=value, dual_value=dval, gap=gap, plan=plan.to_json(),
               potential=u.to_json())
    _emit(dumps(out), cfg.out)
    if gap > cfg.lp_tol:
        raise CertificateFailure(f"duality gap {gap:.3e} exceeds {cfg.lp_tol:g}")
    return EXIT_OK


def cmd_stratify(cfg: RunConfig) -> int:
    rho = _load_measure(cfg)
    kern = kernel_from_tag(cfg.kernel)
    value, plan = primal.relaxed_cost(rho, cfg.N, kern)
    if math.isinf(value):
        _emit(dumps({"command": "stratify", "primal_value": value,
                     "reason": "infinite cost: no decomposition"}), cfg.out)
        return EXIT_OK
    dec = primal.stratify(rho, plan, kern)
    mass_sum = float(dec.masses().sum())
    out = {"command": "stratify", "N": cfg.N, "primal_value": value,
           "decomposition": dec.to_json(), "layer_mass_sum": mass_sum,
           "recombination_error": float(np.abs(dec.recombined() - rho.weights).max())
           if len(rho) else 0.0}
    _emit(dumps(out), cfg.out)
    problems = []
    if abs(dec.total_cost() - value) > 1e-7:
        problems.append("layer costs do not add up to the relaxed cost")
    if out["recombination_error"] > 1e-9:
        problems.append("layers do not recombine to the measure")
    if rho.total_mass > 1.0 / cfg.N + 1e-12 and abs(mass_sum - 1.0) > 1e-8:
        problems.append("layer masses do not sum to one")
    if problems:
        raise CertificateFailure("; ".join(problems))
    return EXIT_OK


def cmd_potential(cfg: RunConfig) -> int:
    rho = _load_measure(cfg)
    kern = kernel_from_tag(cfg.kernel)
    phi0 = None
    if cfg.potential:
        phi0 = _load_potential(cfg.potential)
        if not isinstance(phi0, potential.GridFunction):
            raise InputError("--potential for this command must be a grid function")
        grid = phi0
    elif cfg.grid:
        grid = parse_grid(cfg.grid, rho.dim)
    else:
        raise InputError("--grid or --potential is required")
    try:
        res = potential.iterate_potential(rho, phi0, cfg.N, kern, tol=cfg.iter_tol,
                                          max_iters=cfg.max_iters, grid=grid)
    except MeasureError as exc:
        raise InputError(str(exc)) from None
    except potential.InvariantViolation as exc:
        raise CertificateFailure(str(exc)) from None
    trace_path = cfg.trace or (str(Path(cfg.out).with_suffix(".trace.csv"))
                               if cfg.out else "trace.csv")
    Path(trace_path).write_text(res.trace_csv())
    adm = potential.check_admissible(res.admissible_form(), cfg.N, kern, tol=1e-6)
    out = {"command": "potential", "N": cfg.N, "converged": res.converged,
           "iterations": len(res.trace), "I_N": res.I_N, "R": res.R,
           "lipschitz": res.lipschitz, "lipschitz_bound": res.lipschitz_bound,
           "checks": res.checks, "admissibility": adm.to_json(),
           "potential": res.potential.to_json(), "trace": trace_path}
    _emit(dumps(out), cfg.out)
    if not res.converged:
        raise CertificateFailure(f"no convergence within {cfg.max_iters} iterations")
    if not adm.admissible:
        raise CertificateFailure(f"potential violates admissibility by {adm.max_violation:.3e}")
    return EXIT_OK


def cmd_quantize(cfg: RunConfig) -> int:
    if not cfg.potential:
        raise InputError("--potential is required")
    V = _load_potential(cfg.potential)
    if V.value_at_infinity != 0.0:
        raise InputError("the potential must vanish at infinity (value_at_infinity 0)")
    kern = kernel_from_tag(cfg.kernel)
    if cfg.z_grid:
        Z = parse_z_grid(cfg.z_grid)
        workers = cfg.workers or os.cpu_count() or 1
        try:
            rows, drops = quantize.charge_sweep(V, cfg.N, Z, kern, cfg.gap_tol, workers)
        except quantize.MonotonicityViolation as exc:
            raise CertificateFailure(str(exc)) from None
        if cfg.format == "csv":
            _emit(quantize.sweep_csv(rows), cfg.out)
        else:
            _emit(dumps({"command": "quantize", "N": cfg.N,
                         "sweep": [{"Z": r.Z, "k_N": r.k_N, "mass": r.mass,
                                    "min_value": r.min_value} for r in rows],
                         "mass_drops": drops}), cfg.out)
        return EXIT_OK
    rep = quantize.k_N(V, cfg.N, kern, cfg.gap_tol)
    w = rep.witness_rho
    check = 0.0
    if len(w):
        cost = primal.relaxed_cost(w, cfg.N, kern)[0]
        idx = [int(np.argmin(np.linalg.norm(np.asarray(V.points) - a, axis=1))) for a in w.atoms]
        check = abs(cost - float(w.weights @ np.asarray(V.values)[idx]) - rep.min_value)
    out = {"command": "quantize", **rep.to_json(), "witness_value_error": check}
    _emit(dumps(out), cfg.out)
    if check > 1e-6:
        raise CertificateFailure(f"witness misses the minimum by {check:.3e}")
    return EXIT_OK


COMMANDS = {"cost": cmd_cost, "stratify": cmd_stratify,
            "potential": cmd_potential, "quantize": cmd_quantize}


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


VALUE_FLAGS = ("--grid", "--z-grid")


def _attach_values(argv):
    """Let ``--grid -2,2;41`` through: glue values that start with '-' to their flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--measure", help="measure JSON {dim, atoms, weights}")
    common.add_argument("--potential", help="potential JSON (grid or point values)")
    common.add_argument("--N", type=int, help="number of marginals (default 2)")
    common.add_argument("--kernel", help="'coulomb' (default) or 'power:s'")
    common.add_argument("--grid", help="'lo,hi[,lo,hi...];res'")
    common.add_argument("--z-grid", dest="z_grid", help="'start:stop:steps'")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--trace", help="trace CSV path for the potential command")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--lp-tol", dest="lp_tol", type=float)
    common.add_argument("--gap-tol", dest="gap_tol", type=float)
    common.add_argument("--iter-tol", dest="iter_tol", type=float)
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--config", help="JSON file of option values; flags win")
    common.add_argument("-v", "--verbose", action="count")
    parser = _Parser(prog="relaxed-mmot",
                                     description="Relaxed multi-marginal transport tools")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("cost", parents=[common], help="primal and dual relaxed cost")
    sub.add_parser("stratify", parents=[common], help="layer decomposition of an optimal plan")
    sub.add_parser("potential", parents=[common], help="Lipschitz dual potential on a grid")
    sub.add_parser("quantize", parents=[common], help="minimal mass of minimisers / charge sweep")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values = dict(DEFAULTS)
    if args.config:
        data = _load_json(args.config, "config")
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(command=args.command, **values)
    if cfg.workers is not None and cfg.workers < 1:
        raise InputError("--workers must be positive")
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_attach_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        cfg = make_config(args)
        try:
            kernel_from_tag(cfg.kernel)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (lp.LPError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
