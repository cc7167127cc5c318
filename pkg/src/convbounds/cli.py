"""Command line front end: ``convbounds {spectrum,bounds,simulate,report}``.

Every output file starts with ``#`` comment lines naming the tool version,
the code and the hashes of the inputs it was computed from; re-running a
command on the same inputs reproduces the file byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .bounds import BoundsDomainError, ber_up, curve
from .codec import CodeSpecError, GeneratorSpec, build_trellis
from .simulator import BASES, CODEWORD_BITS, ChannelConfig, SimulationError, run_campaign
from .spectrum import ActiveSpectrum, SpectrumError, active_distances, compute_spectrum, summarize

log = logging.getLogger("convbounds")

EXIT_CONFIG = 2
EXIT_DOMAIN = 3

DEFAULT_BOUNDS_GRID = "log:0.001:0.1:21"
DEFAULT_SIM_GRID = "0.01,0.02,0.03,0.05"
DEFAULT_WMAX_MARGIN = 10
TOOL = f"convbounds {__version__}"


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``"0.01,0.02"``, ``"log:START:STOP:NUM"`` or ``"lin:START:STOP:NUM"``."""
    text = str(text).strip()
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, num = text.split(":")
            a, b, num = float(a), float(b), int(num)
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ConfigError("log grid bounds must be positive")
                grid = np.geomspace(a, b, num)
            else:
                grid = np.linspace(a, b, num)
            values = [float(f"{x:.12g}") for x in grid]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse p grid {text!r}: {exc}") from None
    if not values:
        raise ConfigError("empty p grid")
    bad = [p for p in values if not 0.0 <= p < 0.5]
    if bad:
        raise ConfigError(f"p grid values outside [0, 1/2): {bad}")
    return values


def parse_wmax(text) -> Optional[str | int]:
    text = str(text).strip().lower()
    if text in ("auto", "inf", "none"):
        return text
    if text.startswith("auto+"):
        int(text[5:])
        return text
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"--wmax must be an integer, 'auto', 'auto+K' or 'inf', got {text!r}") from None
    if value < 1:
        raise ConfigError("--wmax must be positive")
    return value


def fmt(x: float) -> str:
    return f"{x:.15e}"


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _code(args) -> GeneratorSpec:
    if not args.code:
        raise ConfigError("--code is required")
    return GeneratorSpec.parse(args.code, allow_noncoprime=args.allow_noncoprime)


def _emit(text: str, out: Optional[str], append: bool = False) -> None:
    if not out or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "a" if append else "w", newline="") as fh:
        fh.write(text)


def _read_commented_csv(path) -> tuple[dict, list[dict]]:
    meta = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            for item in line[1:].split():
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k] = v
        elif line.strip():
            body.append(line)
    return meta, list(csv.DictReader(body))


# ----------------------------------------------------------------- spectrum

def resolve_spectrum(spec: GeneratorSpec, jmax: int, wmax) -> ActiveSpectrum:
    trellis = build_trellis(spec)
    if jmax < spec.m + 1:
        raise ConfigError(f"--jmax must be at least m+1 = {spec.m + 1}")
    if wmax == "inf" or wmax == "none":
        W = None
    elif isinstance(wmax, str):
        margin = DEFAULT_WMAX_MARGIN if wmax == "auto" else int(wmax[5:])
        a = active_distances(trellis, jmax)
        if not a:
            raise SpectrumError(f"no codeword of C_f ends within {jmax} steps")
        W = min(a.values()) + margin
    else:
        W = wmax
    return compute_spectrum(trellis, jmax, W)


def cmd_spectrum(args) -> int:
    spec = _code(args)
    spectrum = resolve_spectrum(spec, args.jmax, parse_wmax(args.wmax))
    _emit(spectrum.to_json(), args.out)
    if not spectrum:
        raise SpectrumError("spectrum is empty: W_max too small for any path to complete")
    summ = summarize(spectrum)
    report = sys.stderr if not args.out or args.out == "-" else sys.stdout
    print(f"code {spec.name}  n={spec.n}  m={spec.m}  J_max={spectrum.J_max}  "
          f"W_max={spectrum.W_max if spectrum.W_max is not None else 'inf'}", file=report)
    print(f"{'j':>4} {'a_j':>5} {'codewords':>12} {'truncated':>9}", file=report)
    for j in range(spec.m + 1, min(spectrum.J_max, spec.m + 10) + 1):
        if j in spectrum.per_length:
            total = sum(c for _, c in spectrum.per_length[j])
            print(f"{j:>4} {spectrum.active_distance(j):>5} {total:>12} "
                  f"{'yes' if spectrum.truncated.get(j) else 'no':>9}", file=report)
        else:
            print(f"{j:>4} {'-':>5} {0:>12} {'yes' if spectrum.truncated.get(j) else 'no':>9}",
                  file=report)
    print(f"w_min={summ.w_min}  N_wmin={summ.N_wmin}  j_wmin={summ.j_wmin}", file=report)
    return 0


# ------------------------------------------------------------------- bounds

def load_spectrum(path, allow_noncoprime=False) -> ActiveSpectrum:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read spectrum file: {exc}") from None
    try:
        return ActiveSpectrum.from_json(text, allow_noncoprime=allow_noncoprime)
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"malformed spectrum file {path}: {exc}") from None
    except SpectrumError as exc:
        raise ConfigError(str(exc)) from None


def cmd_bounds(args) -> int:
    grid = parse_grid(args.pgrid or DEFAULT_BOUNDS_GRID)
    per_j = [int(x) for x in args.per_j.split(",")] if args.per_j else []
    if args.spectrum:
        spectrum = load_spectrum(args.spectrum, args.allow_noncoprime)
        source = f"spectrum_sha256={sha256_file(args.spectrum)}"
        if args.code and GeneratorSpec.parse(args.code, allow_noncoprime=True).name != spectrum.code.name:
            raise ConfigError(f"spectrum file is for {spectrum.code.name}, not {args.code}")
        spec = spectrum.code
    else:
        spec = _code(args)
        spectrum = resolve_spectrum(spec, args.jmax, parse_wmax(args.wmax))
        source = f"spectrum_digest={spectrum.digest}"
    bc = curve(spec, spectrum, grid)
    s = bc.summary
    buf = io.StringIO()
    buf.write(f"# {TOOL} bounds\n")
    buf.write(f"# code={spec.name} {source} J_max={spectrum.J_max} "
              f"W_max={spectrum.W_max if spectrum.W_max is not None else 'inf'} j_wmin={s.j_wmin}\n")
    header = ["p", "ber_low", "ber_up", "j_used", "w_min", "n_wmin"]
    header += [f"ber_up_j{J}" for J in per_j]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, p in enumerate(bc.grid):
        row = [fmt(p), fmt(bc.ber_low[i]), fmt(bc.ber_up[i]), bc.J_used, s.w_min, s.N_wmin]
        row += [fmt(ber_up(p, spectrum, J)) for J in per_j]
        w.writerow(row)
    _emit(buf.getvalue(), args.out)
    return 0


# ----------------------------------------------------------------- simulate

SIM_HEADER = ["p", "frames", "frame_len", "ber", "fer", "ci_low", "ci_high", "seed", "basis"]


def cmd_simulate(args) -> int:
    spec = _code(args)
    grid = parse_grid(args.pgrid or DEFAULT_SIM_GRID)
    if args.basis not in BASES:
        raise ConfigError(f"--basis must be one of {BASES}")
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1")
    if args.frame_len <= spec.m:
        raise ConfigError(f"--frame-len must exceed m={spec.m}")
    trellis = build_trellis(spec)
    reports = []
    for p in grid:
        r = run_campaign(spec, ChannelConfig(p, args.seed), args.frames, args.frame_len,
                         args.basis, workers=args.workers, trellis=trellis)
        log.info("p=%g ber=%.3e fer=%.3e (%d bit errors)", p, r.ber, r.fer, r.bit_errors)
        reports.append(r)
    if args.out and args.out.endswith(".json"):
        _emit(json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True) + "\n", args.out)
        return 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fresh = not (args.append and args.out and Path(args.out).exists())
    if fresh:
        buf.write(f"# {TOOL} simulate\n")
        buf.write(f"# code={spec.name} frame_len={args.frame_len} info_len={args.frame_len - spec.m} "
                  f"basis={args.basis}\n")
        buf.write(f"# rng={reports[0].rng.replace(' ', '_')}\n")
        w.writerow(SIM_HEADER)
    for r in reports:
        w.writerow([fmt(r.p), r.frames, r.frame_len_tuples, fmt(r.ber), fmt(r.fer),
                    fmt(r.ci95[0]), fmt(r.ci95[1]), r.seed, r.ber_basis])
    _emit(buf.getvalue(), args.out, append=not fresh)
    return 0


# ------------------------------------------------------------------- report

def _match(p: float, pool: dict[float, dict]) -> Optional[dict]:
    for q, row in pool.items():
        if math.isclose(p, q, rel_tol=1e-9, abs_tol=1e-15):
            return row
    return None


def cmd_report(args) -> int:
    if not args.bounds or not args.sim:
        raise ConfigError("report needs --bounds and --sim")
    for path in (args.bounds, args.sim):
        if not Path(path).exists():
            raise ConfigError(f"no such file: {path}")
    bmeta, brows = _read_commented_csv(args.bounds)
    smeta, srows = _read_commented_csv(args.sim)
    if bmeta.get("code") != smeta.get("code"):
        raise ConfigError(f"code mismatch: bounds {bmeta.get('code')} vs sim {smeta.get('code')}")
    bounds = {float(r["p"]): r for r in brows}
    missing = [r["p"] for r in srows if _match(float(r["p"]), bounds) is None]
    if missing or not srows:
        raise ConfigError(f"simulated p values without a bounds row: {missing or 'no rows'}")
    buf = io.StringIO()
    buf.write(f"# {TOOL} report\n")
    buf.write(f"# code={bmeta.get('code')} bounds_sha256={sha256_file(args.bounds)} "
              f"sim_sha256={sha256_file(args.sim)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "ber_low", "ber_sim", "ci_low", "ci_high", "ber_up", "sandwich"])
    for r in srows:
        b = _match(float(r["p"]), bounds)
        lo, up = float(b["ber_low"]), float(b["ber_up"])
        ci_lo, ci_hi = float(r["ci_low"]), float(r["ci_high"])
        ok = ci_lo >= lo and ci_hi <= up
        w.writerow([r["p"], b["ber_low"], r["ber"], r["ci_low"], r["ci_high"], b["ber_up"],
                    "pass" if ok else "fail"])
    _emit(buf.getvalue(), args.out)
    return 0


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON/YAML file of option defaults; flags override it")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    code = argparse.ArgumentParser(add_help=False)
    code.add_argument("--code", help='octal generators, feedback first, e.g. "(13,17)"')
    code.add_argument("--allow-noncoprime", action="store_true",
                      help="accept generators with a common factor")

    trunc = argparse.ArgumentParser(add_help=False)
    trunc.add_argument("--jmax", type=int, default=40, help="longest burst length in tuples")
    trunc.add_argument("--wmax", default="auto",
                       help="weight cap: integer, 'inf', 'auto' (w_min+10) or 'auto+K'")

    fmt_ = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="convbounds", description=__doc__.splitlines()[0], formatter_class=fmt_)
    parser.add_argument("--version", action="version", version=TOOL)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", parents=[common, code, trunc], formatter_class=fmt_,
                        help="active-distance spectrum to JSON")
    sp.set_defaults(func=cmd_spectrum)

    bp = sub.add_parser("bounds", parents=[common, code, trunc], formatter_class=fmt_,
                        help="BER lower/upper bounds to CSV")
    bp.add_argument("--spectrum", help="spectrum JSON from 'convbounds spectrum'")
    bp.add_argument("--pgrid", default=DEFAULT_BOUNDS_GRID,
                    help="'p1,p2,...', 'log:START:STOP:NUM' or 'lin:START:STOP:NUM'")
    bp.add_argument("--per-j", help="extra ber_up columns truncated at these lengths, e.g. 10,20,30")
    bp.set_defaults(func=cmd_bounds)

    mp = sub.add_parser("simulate", parents=[common, code], formatter_class=fmt_,
                        help="Monte Carlo BER/FER with Viterbi decoding")
    mp.add_argument("--pgrid", default=DEFAULT_SIM_GRID)
    mp.add_argument("--frames", type=int, default=10000)
    mp.add_argument("--frame-len", type=int, default=1000, help="tuples per frame incl. tail")
    mp.add_argument("--seed", type=int, default=0)
    mp.add_argument("--basis", default=CODEWORD_BITS, choices=BASES)
    mp.add_argument("--workers", type=int, default=1)
    mp.add_argument("--append", action="store_true", help="append rows to an existing CSV")
    mp.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", parents=[common], formatter_class=fmt_,
                        help="join bounds and simulation CSVs")
    rp.add_argument("--bounds")
    rp.add_argument("--sim")
    rp.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    cfg = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except (ConfigError, CodeSpecError, SimulationError) as exc:
        print(f"convbounds: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BoundsDomainError, SpectrumError) as exc:
        print(f"convbounds: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
