"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .. import analysis
from ..channel import extract_taps, load_impulse_response_csv, save_taps_csv
from ..codebook import code_from_spec
from ..errors import ConfigError, NumericalError, ParameterError
from .config import load_configs, parse_grid
from .sweep import emit_csv, run_sweep

log = logging.getLogger("grandai")


def preset_names() -> list[str]:
    root = resources.files("grandai") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_path(name: str) -> Path:
    path = resources.files("grandai") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return Path(str(path))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _variant_path(out: Path, label: str, many: bool) -> Path:
    if not many:
        return out
    return out.with_name(f"{out.stem}_{label}{out.suffix or '.csv'}")


def cmd_simulate(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("--config", "give exactly one of --config or --preset")
    path = Path(args.config) if args.config else preset_path(args.preset)
    overrides: dict = {}
    if args.ebn0 is not None:
        overrides["ebn0"] = parse_grid(args.ebn0)
    if args.seed is not None:
        overrides["seed"] = args.seed
    stop = {}
    if args.max_frames is not None:
        stop["max_frames"] = args.max_frames
    if args.min_errors is not None:
        stop["min_errors"] = args.min_errors
    if stop:
        overrides["stop"] = stop
    configs = load_configs(path, overrides)
    if args.variant:
        missing = [v for v in args.variant if v not in configs]
        if missing:
            raise ConfigError("--variant", f"unknown variant(s) {missing}; have {list(configs)}")
        configs = {k: configs[k] for k in args.variant}
    out = Path(args.out)
    for label, cfg in configs.items():
        result = run_sweep(cfg, workers=args.workers)
        target = emit_csv(result, _variant_path(out, label, len(configs) > 1))
        print(f"wrote {target}")
    return 0


def cmd_entropy(args) -> int:
    rows = []
    if args.model == "gm1":
        header = ["rho", "b", "rate_bits", "correlation_bits"]
        for rho in _floats(args.rho):
            for b in _ints(args.b):
                rep = analysis.block_entropy_rate(rho, args.sigma2, b)
                rows.append([rho, b, analysis.bits(rep.rate), analysis.bits(rep.correlation_term)])
    else:
        header = ["rho1", "rho2", "n", "rate_bits", "complex_rate_bits"]
        for n in _ints(args.n):
            rep = analysis.ar2_entropy_rate(args.rho1, args.rho2, args.sigma2, n)
            rows.append([args.rho1, args.rho2, n, analysis.bits(rep.rate), analysis.bits(rep.complex_rate)])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, int) else "%.12g" % v for v in r])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_codes(args) -> int:
    spec = {"type": args.type, "k": args.k}
    if args.type == "rlc":
        spec.update(n=args.n, seed=args.seed)
    else:
        if args.poly is None:
            raise ConfigError("--poly", "CRC codes need a polynomial")
        spec["poly"] = args.poly
    try:
        code = code_from_spec(spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError("codes", f"incomplete code description: {exc}") from None
    if args.out_prefix:
        for name, mat in (("G", code.generator), ("H", code.parity_check)):
            target = Path(f"{args.out_prefix}_{name}.txt")
            np.savetxt(target, mat, fmt="%d", delimiter="")
            print(f"wrote {target}")
    else:
        print(f"# {code.name} [{code.n},{code.k}]")
        for name, mat in (("G", code.generator), ("H", code.parity_check)):
            print(f"# {name}")
            for row in mat:
                print("".join(str(int(v)) for v in row))
    return 0


def cmd_extract(args) -> int:
    g = load_impulse_response_csv(args.input)
    channel = extract_taps(g, args.L, args.fs, args.n_s)
    save_taps_csv(channel, args.out)
    print(f"wrote {args.out} ({channel.n_s} symbol times, {channel.memory} taps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grandai", description="Block-wise GRAND decoding experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an Eb/N0 sweep")
    s.add_argument("--config", help="YAML config file")
    s.add_argument("--preset", help="name of a shipped preset")
    s.add_argument("--variant", action="append", help="restrict to these variant labels")
    s.add_argument("--ebn0", help='grid override, "a:s:b" or "x,y,z"')
    s.add_argument("--seed", type=int)
    s.add_argument("--max-frames", type=int)
    s.add_argument("--min-errors", type=int)
    s.add_argument("--workers", type=int, help="worker processes (default: GRANDAI_WORKERS or CPU count)")
    s.add_argument("--out", required=True, help="CSV path; variants get a _label suffix")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="closed-form analysis")
    asub = a.add_subparsers(dest="what", required=True)
    e = asub.add_parser("entropy", help="entropy rates in bits per complex sample")
    e.add_argument("--model", choices=("gm1", "ar2"), default="gm1")
    e.add_argument("--rho", default="0.25,0.5,0.75")
    e.add_argument("--b", default="1,2,4,8,16")
    e.add_argument("--rho1", type=float, default=0.6)
    e.add_argument("--rho2", type=float, default=0.3)
    e.add_argument("--n", default="4,8,16,64")
    e.add_argument("--sigma2", type=float, default=1.0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_entropy)

    c = sub.add_parser("codes", help="code construction")
    csub = c.add_subparsers(dest="what", required=True)
    mk = csub.add_parser("make", help="dump generator and parity-check matrices")
    mk.add_argument("--type", choices=("rlc", "crc"), default="rlc")
    mk.add_argument("--n", type=int)
    mk.add_argument("--k", type=int, required=True)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--poly", help="Koopman-notation polynomial, e.g. 0xb41")
    mk.add_argument("--out-prefix")
    mk.set_defaults(func=cmd_codes)

    ch = sub.add_parser("channel", help="channel utilities")
    chsub = ch.add_subparsers(dest="what", required=True)
    ex = chsub.add_parser("extract-taps", help="impulse-response CSV to tap CSV")
    ex.add_argument("--in", dest="input", required=True)
    ex.add_argument("--L", type=int, required=True)
    ex.add_argument("--fs", type=float, default=1.0)
    ex.add_argument("--n-s", type=int)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=cmd_extract)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
