"""Command-line interface: system-file parsing, dispatch, JSON reports.

Commands: classify, lyapunov, center-verify, resultant-demo, unfold,
portrait.  Reports are deterministic JSON with rationals rendered as
strings; exit codes distinguish parse errors (2), precondition
violations (3) and inconclusive numerics (4).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .bifurc import (
    RootIsolationError,
    TruncationOrderError,
    apply_schedule,
    sliding_segment,
    unfold_cycles,
)
from .centers import CONDITION_IDS, CertificationError, certify_center
from .exactalg import MPoly, PolyParseError, format_poly, parse_poly, rational, resultant
from .lyapunov import FitError, IntegrationError, displacement_coeffs
from .nilclass import classify_half
from .portrait import render_portrait
from .sysmodel import (
    PerturbationParams,
    PlanarField,
    SwitchingSystem,
    Z2CubicParams,
    build_z2_cubic,
    perturbed_family,
    shift_to_origin,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_INCONCLUSIVE = 4

DEFAULT_PRECISION = int(os.environ.get("NILCYC_PRECISION_BITS", "256"))

Z2_KEYS = ("a02", "a12", "a21", "a03", "b02", "b12", "b21", "b03")
PERT_KEYS = tuple(f.name for f in dataclasses.fields(PerturbationParams))
PARAMS_KEYS = PERT_KEYS + ("delta1", "b", "eps")


class SystemFileError(ValueError):
    """Malformed system or schedule file, with position information."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass
class RunConfig:
    """Validated invocation parameters for one CLI command."""

    command: str
    system: Optional[str] = None
    order: int = 8
    precision: int = DEFAULT_PRECISION
    eps_samples: Tuple[Fraction, ...] = ()
    output: Optional[str] = None
    condition: Optional[str] = None
    schedule: Optional[str] = None
    extras: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.order <= 0:
            raise ValueError("order must be positive")
        if self.precision <= 0:
            raise ValueError("precision must be positive")
        if len(set(self.eps_samples)) != len(self.eps_samples):
            raise ValueError("eps samples must be distinct")


# -- config file scanning ----------------------------------------------------

def _scan_entries(path: str) -> List[Tuple[str, str, str, int, int]]:
    """Tokenize `[section]` headers and key="value" pairs.

    Returns (section, key, value, line, col) per assignment, in file
    order; col points at the start of the quoted value.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    entries = []
    section = None
    for lineno, raw in enumerate(lines, start=1):
        i = 0
        n = len(raw)
        while i < n:
            ch = raw[i]
            if ch.isspace():
                i += 1
                continue
            if ch == "#":
                break
            if ch == "[":
                end = raw.find("]", i)
                if end < 0:
                    raise SystemFileError("unterminated section header",
                                          lineno, i + 1)
                section = raw[i + 1:end].strip()
                if not section:
                    raise SystemFileError("empty section name", lineno, i + 1)
                i = end + 1
                continue
            # key = "value"
            start = i
            while i < n and (raw[i].isalnum() or raw[i] == "_"):
                i += 1
            key = raw[start:i]
            if not key:
                raise SystemFileError(f"unexpected character {ch!r}",
                                      lineno, i + 1)
            while i < n and raw[i].isspace():
                i += 1
            if i >= n or raw[i] != "=":
                raise SystemFileError(f"expected '=' after {key!r}",
                                      lineno, i + 1)
            i += 1
            while i < n and raw[i].isspace():
                i += 1
            if i >= n or raw[i] != '"':
                raise SystemFileError("expected a double-quoted value",
                                      lineno, i + 1)
            close = raw.find('"', i + 1)
            if close < 0:
                raise SystemFileError("unterminated string value",
                                      lineno, i + 1)
            value = raw[i + 1:close]
            if section is None:
                raise SystemFileError(
                    f"assignment {key!r} before any [section]", lineno,
                    start + 1)
            entries.append((section, key, value, lineno, i + 2))
            i = close + 1
    return entries


def _rational_at(text: str, line: int, col: int) -> Fraction:
    try:
        return rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise SystemFileError(f"malformed rational {text!r}: {exc}",
                              line, col) from exc


def parse_system_file(path: str) -> Union[SwitchingSystem, Z2CubicParams]:
    """Read a system description file.

    A `[z2cubic]` section gives coefficient values for the cubic family
    (optionally refined by a `[params]` section with perturbation data,
    in which case the perturbed switching system is returned); `[upper]`
    and `[lower]` sections give raw polynomial half-fields P and Q.
    """
    entries = _scan_entries(path)
    z2: dict = {}
    params: dict = {}
    halves: dict = {"upper": {}, "lower": {}}
    for section, key, value, line, col in entries:
        if section == "z2cubic":
            if key not in Z2_KEYS:
                raise SystemFileError(f"unknown parameter name {key!r}",
                                      line, col)
            z2[key] = _rational_at(value, line, col)
        elif section == "params":
            if key not in PARAMS_KEYS:
                raise SystemFileError(f"unknown parameter name {key!r}",
                                      line, col)
            params[key] = _rational_at(value, line, col)
        elif section in ("upper", "lower"):
            if key not in ("P", "Q"):
                raise SystemFileError(
                    f"half-field sections take P and Q, not {key!r}",
                    line, col)
            halves[section][key] = parse_poly(value, line_offset=line,
                                              col_offset=col)
        else:
            raise SystemFileError(f"unknown section {section!r}", line, col)
    has_raw = any(halves[h] for h in halves)
    if z2 and has_raw:
        raise ValueError("cannot mix [z2cubic] with [upper]/[lower]")
    if has_raw:
        if params:
            raise ValueError("[params] requires a [z2cubic] section")
        for h in ("upper", "lower"):
            missing = {"P", "Q"} - set(halves[h])
            if missing:
                raise ValueError(f"[{h}] section missing {sorted(missing)}")
        return SwitchingSystem(
            PlanarField(halves["upper"]["P"], halves["upper"]["Q"]),
            PlanarField(halves["lower"]["P"], halves["lower"]["Q"]),
        )
    if not z2 and not params:
        raise ValueError("no [z2cubic] or [upper]/[lower] sections found")
    base = Z2CubicParams(**z2)
    if not params:
        return base
    if "eps" not in params:
        raise ValueError("[params] section requires eps")
    pert = PerturbationParams(
        **{k: v for k, v in params.items() if k in PERT_KEYS})
    return perturbed_family(base, pert, eps=params["eps"],
                            delta1=params.get("delta1", 0),
                            b=params.get("b", 0))


def parse_schedule_file(path: str) -> List[Tuple[str, Fraction]]:
    """Read an ordered `[schedule]` section of name="rational" stages."""
    entries = _scan_entries(path)
    stages = []
    for section, key, value, line, col in entries:
        if section != "schedule":
            raise SystemFileError(f"unknown section {section!r}", line, col)
        stages.append((key, _rational_at(value, line, col)))
    if not stages:
        raise ValueError("schedule file contains no stages")
    return stages


# -- serialization helpers ---------------------------------------------------

def _emit(report: dict, output: Optional[str]) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _as_switching(loaded) -> SwitchingSystem:
    if isinstance(loaded, Z2CubicParams):
        return build_z2_cubic(loaded)
    return loaded


def _require_params(loaded) -> Z2CubicParams:
    if not isinstance(loaded, Z2CubicParams):
        raise ValueError("this command needs a [z2cubic] system file")
    return loaded


# -- command implementations -------------------------------------------------

def _cmd_classify(cfg: RunConfig) -> int:
    loaded = parse_system_file(cfg.system)
    sys_ = _as_switching(loaded)
    px, py = cfg.extras["point"]
    if py != 0:
        raise ValueError("classification point must lie on y = 0")
    shifted = shift_to_origin(sys_, (px, 0))
    report = {"point": [str(px), str(py)], "order": cfg.order}
    for name, field in (("upper", shifted.upper), ("lower", shifted.lower)):
        cls = classify_half(field, order=cfg.order)
        report[name] = {
            "kind": cls.kind,
            "multiplicity": cls.multiplicity,
            "witness": [str(w) for w in cls.witness],
        }
    _emit(report, cfg.output)
    return EXIT_OK


def _cmd_lyapunov(cfg: RunConfig) -> int:
    loaded = parse_system_file(cfg.system)
    reports = []
    if isinstance(loaded, Z2CubicParams):
        if not cfg.eps_samples:
            raise ValueError(
                "a [z2cubic] system needs --eps to fix the scaling")
        for eps in cfg.eps_samples:
            sys_ = perturbed_family(loaded, eps=eps)
            reports.append(displacement_coeffs(
                sys_, cfg.order, cfg.precision, eps=eps))
    else:
        if cfg.eps_samples:
            raise ValueError("--eps applies only to [z2cubic] systems")
        reports.append(displacement_coeffs(loaded, cfg.order, cfg.precision))
    body = {"reports": [r.to_json_dict() for r in reports]}
    _emit(body, cfg.output)
    return EXIT_OK


def _cmd_center_verify(cfg: RunConfig) -> int:
    params = _require_params(parse_system_file(cfg.system))
    square = cfg.extras.get("b21_squared")
    cert = certify_center(
        params, cfg.condition, b21_squared=square, spotcheck=True,
        spotcheck_order=cfg.order, precision=cfg.precision,
        spotcheck_eps=cfg.eps_samples or (Fraction(1, 10),),
    )
    _emit(cert.to_json_dict(), cfg.output)
    if cert.spotcheck is not None and not cert.spotcheck.passed:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _cmd_resultant_demo(cfg: RunConfig) -> int:
    if cfg.extras["case"] != "v6":
        raise ValueError("unknown demo case")
    b21 = MPoly.variable("b21")
    p02 = MPoly.variable("p02")
    branch_a = (7 * b21**2 + 40 * b21 * p02 - 80 * p02**2) * (
        29 * b21**2 - 40 * b21 * p02 + 80 * p02**2)
    branch_b = 551 * b21**2 + 1544 * b21 * p02 - 3088 * p02**2
    res = resultant(branch_a, branch_b, "p02")
    sys.stdout.write(format_poly(res) + "\n")
    return EXIT_OK


def _cmd_unfold(cfg: RunConfig) -> int:
    center = _require_params(parse_system_file(cfg.system))
    schedule = parse_schedule_file(cfg.schedule)
    eps = cfg.eps_samples[0] if cfg.eps_samples else Fraction(1, 10)
    cert = unfold_cycles(
        center, schedule, precision=cfg.precision, order=cfg.order,
        eps=eps, expected_count=cfg.extras.get("expected_count"))
    body = cert.to_json_dict()
    sys_ = apply_schedule_system(center, schedule, eps)
    seg = sliding_segment(sys_)
    body["sliding_segment"] = None if seg is None else seg.to_json_dict()
    _emit(body, cfg.output)
    return EXIT_OK


def apply_schedule_system(center, schedule, eps) -> SwitchingSystem:
    base, pert, delta1 = apply_schedule(center, schedule)
    return perturbed_family(base, pert, eps=eps, delta1=delta1)


def _cmd_portrait(cfg: RunConfig) -> int:
    sys_ = _as_switching(parse_system_file(cfg.system))
    seeds = cfg.extras["seeds"]
    window = cfg.extras["window"]
    tol = cfg.extras["tol"]
    t_end = cfg.extras["t_end"]
    render_portrait(sys_, seeds, window, cfg.output,
                    t_span=(0.0, t_end), tol=tol)
    return EXIT_OK


_COMMANDS = {
    "classify": _cmd_classify,
    "lyapunov": _cmd_lyapunov,
    "center-verify": _cmd_center_verify,
    "resultant-demo": _cmd_resultant_demo,
    "unfold": _cmd_unfold,
    "portrait": _cmd_portrait,
}


# -- argument parsing --------------------------------------------------------

def _fraction_arg(text: str) -> Fraction:
    try:
        return rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _point_arg(text: str) -> Tuple[Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected X,Y")
    return (_fraction_arg(parts[0]), _fraction_arg(parts[1]))


def _window_arg(text: str) -> Tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected x0,x1,y0,y1")
    return tuple(float(p) for p in parts)


def _read_seeds(path: str) -> List[Tuple[float, float]]:
    seeds = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise SystemFileError("seed lines take two coordinates",
                                      lineno, 1)
            seeds.append((float(parts[0]), float(parts[1])))
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilcyc",
        description="Analysis of planar switching systems with nilpotent "
                    "singular points on the x-axis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, order_default=8):
        p.add_argument("--system", required=True, help="system file path")
        p.add_argument("--order", type=int, default=order_default)
        p.add_argument("--precision", type=int, default=DEFAULT_PRECISION,
                       help="working precision in bits "
                            "(env NILCYC_PRECISION_BITS)")
        p.add_argument("--output", help="write the JSON report here "
                                        "instead of stdout")

    p = sub.add_parser("classify", help="classify the nilpotent point")
    common(p)
    p.add_argument("--point", type=_point_arg, default=(Fraction(1), Fraction(0)))

    p = sub.add_parser("lyapunov", help="displacement-series coefficients")
    common(p)
    p.add_argument("--eps", type=_fraction_arg, action="append", default=[])

    p = sub.add_parser("center-verify", help="certify a bi-center condition")
    common(p)
    p.add_argument("--condition", required=True, choices=CONDITION_IDS)
    p.add_argument("--b21-squared", type=_fraction_arg, default=None)
    p.add_argument("--eps", type=_fraction_arg, action="append", default=[])

    p = sub.add_parser("resultant-demo",
                       help="print an exact resultant identity")
    p.add_argument("case", choices=["v6"])

    p = sub.add_parser("unfold", help="limit cycles along a schedule")
    common(p, order_default=6)
    p.add_argument("--schedule", required=True)
    p.add_argument("--eps", type=_fraction_arg, action="append", default=[])
    p.add_argument("--expected-count", type=int, default=None)

    p = sub.add_parser("portrait", help="render an SVG phase portrait")
    p.add_argument("--system", required=True)
    p.add_argument("--window", type=_window_arg, required=True)
    p.add_argument("--seeds", help="file with one x,y seed per line")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--t-end", type=float, default=40.0)
    p.add_argument("--output", required=True, help="SVG output path")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    extras = {}
    if args.command == "classify":
        extras["point"] = args.point
    elif args.command == "resultant-demo":
        extras["case"] = args.case
    elif args.command == "unfold":
        extras["expected_count"] = args.expected_count
    elif args.command == "portrait":
        extras["window"] = args.window
        extras["seeds"] = _read_seeds(args.seeds) if args.seeds else []
        extras["tol"] = args.tol
        extras["t_end"] = args.t_end
    return RunConfig(
        command=args.command,
        system=getattr(args, "system", None),
        order=getattr(args, "order", 8),
        precision=getattr(args, "precision", DEFAULT_PRECISION),
        eps_samples=tuple(getattr(args, "eps", []) or []),
        output=getattr(args, "output", None),
        condition=getattr(args, "condition", None),
        schedule=getattr(args, "schedule", None),
        extras=extras,
    )


def run(cfg: RunConfig) -> int:
    """Dispatch one validated configuration; returns the exit code."""
    try:
        return _COMMANDS[cfg.command](cfg)
    except (PolyParseError, SystemFileError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (FileNotFoundError, CertificationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except (TruncationOrderError, RootIsolationError, IntegrationError,
            FitError, ArithmeticError) as exc:
        sys.stderr.write(f"inconclusive: {exc}\n")
        return EXIT_INCONCLUSIVE


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (PolyParseError, SystemFileError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
