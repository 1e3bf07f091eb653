"""Command-line entry point.

    rprfas bank   --hpbw 65 --np 7x7 --out bank.bin
    rprfas codec  [--bank bank.bin] [--threshold -30]
    rprfas run    --config run.toml [--trials N] [--estimator omp_mmv]
    rprfas sweep  --param p_c_dbm --values 27,29,31,33
    rprfas report out/trials.csv [...]

Global flags (--config, --seed, --out-dir, --threads) are accepted before or
after the subcommand.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .codec import CodecConfig, compress, nmse_and_ratio, reconstruct
from .config import ConfigError, Estimator, RunConfig, config_from_mapping, load_config
from .harness import run_montecarlo, summary_from_csv
from .patterns import PatternBankConfig, build_bank, load_bank, save_bank

__all__ = ["main", "build_parser", "SWEEP_PARAMS"]

TABLE_HPBW = (65.0, 45.0, 25.0, 15.0)
TABLE_BANKS = ((11, 11), (9, 9), (7, 7))


def _dims(text: str) -> tuple:
    """'7x7' -> (7, 7); a perfect-square total such as '49' -> (7, 7)."""
    text = text.strip().lower()
    if "x" in text:
        a, _, e = text.partition("x")
        return int(a), int(e)
    n = int(text)
    k = math.isqrt(n)
    if k * k != n:
        raise ValueError(f"{text} is not AxE or a square count")
    return k, k


def _array_dims(text: str) -> tuple:
    """UAV array: 'AxE', a square count (4 -> 2x2) or a linear count (2 -> 2x1)."""
    text = text.strip().lower()
    if "x" in text:
        return _dims(text)
    n = int(text)
    k = math.isqrt(n)
    return (k, k) if k * k == n else (n, 1)


def _sweep_hpbw(v):
    return {"hpbw_deg": float(v)}


def _sweep_np(v):
    a, e = _dims(v)
    return {"n_p_azi": a, "n_p_ele": e}


def _sweep_pc(v):
    return {"p_c_dbm": float(v)}


def _sweep_nu(v):
    a, e = _array_dims(v)
    return {"n_u_azi": a, "n_u_ele": e}


SWEEP_PARAMS = {"hpbw": _sweep_hpbw, "n_p": _sweep_np, "p_c_dbm": _sweep_pc, "n_u": _sweep_nu}


def _global_flags(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="flat TOML run configuration")
    parser.add_argument("--seed", type=int, default=d, help="base seed (overrides the config)")
    parser.add_argument("--out-dir", default=d, help="output directory (overrides the config)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads for Monte Carlo trials")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rprfas", description="Pattern-reconfigurable anti-jamming link simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", metavar="{bank,codec,run,sweep,report}")
    sub.required = True

    b = sub.add_parser("bank", parents=[common], help="build and save a pattern bank")
    b.add_argument("--hpbw", type=float, help="element half-power beamwidth in degrees")
    b.add_argument("--np", dest="n_p", help="bank size as AxE, e.g. 7x7")
    b.add_argument("--sla", type=float, help="side-lobe attenuation in dB")
    b.add_argument("--amax", type=float, help="maximum attenuation in dB")
    b.add_argument("--out", help="bank file (default <out-dir>/bank.bin)")

    c = sub.add_parser("codec", parents=[common], help="compress banks and report NMSE / storage ratio")
    c.add_argument("--bank", help="saved bank; without it every HPBW x bank size cell is tabulated")
    c.add_argument("--threshold", type=float, default=-30.0, help="keep level in dB (default -30)")
    c.add_argument("--db-factor", type=float, default=10.0, choices=(10.0, 20.0))

    r = sub.add_parser("run", parents=[common], help="Monte Carlo run from a configuration file")
    r.add_argument("--trials", type=int)
    r.add_argument("--estimator", choices=[e.value for e in Estimator])
    r.add_argument("--compressed", action="store_true", default=None, help="use the reconstructed C_L")

    s = sub.add_parser("sweep", parents=[common], help="vary one parameter, one summary per value")
    s.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma-separated list")
    s.add_argument("--trials", type=int)
    s.add_argument("--estimator", choices=[e.value for e in Estimator])

    rep = sub.add_parser("report", parents=[common], help="aggregate trial CSVs")
    rep.add_argument("csv", nargs="+", help="trials.csv files written by run or sweep")
    return p


def _base_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    if args.seed is not None:
        over["base_seed"] = args.seed
    if args.out_dir is not None:
        over["out_dir"] = args.out_dir
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "estimator", None) is not None:
        over["estimator"] = args.estimator
    if getattr(args, "compressed", None):
        over["use_compressed"] = True
    return config_from_mapping(over, cfg) if over else cfg


def _cmd_bank(args, out) -> int:
    base = _base_config(args).bank
    el = base.element
    el = replace(el, **{k: v for k, v in (("hpbw_deg", args.hpbw), ("sla_db", args.sla), ("a_max_db", args.amax))
                        if v is not None})
    n_azi, n_ele = _dims(args.n_p) if args.n_p else (base.n_p_azi, base.n_p_ele)
    cfg = replace(base, n_p_azi=n_azi, n_p_ele=n_ele, element=el)
    path = Path(args.out) if args.out else Path(_base_config(args).out_dir) / "bank.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_bank(build_bank(cfg), path)
    print(f"wrote {path}: {cfg.n_p} patterns, HPBW {el.hpbw_deg:g} deg", file=out)
    return 0


def _cmd_codec(args, out) -> int:
    codec_cfg = CodecConfig(args.threshold, args.db_factor)
    if args.bank:
        banks = [load_bank(args.bank)]
    else:
        elem = _base_config(args).bank.element
        banks = [build_bank(PatternBankConfig(a, e, replace(elem, hpbw_deg=h)))
                 for h in TABLE_HPBW for a, e in TABLE_BANKS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hpbw_deg", "n_p_azi", "n_p_ele", "nmse_db", "ratio", "byte_ratio", "records"])
    print(f"{'HPBW':>6} {'bank':>7} {'NMSE [dB]':>10} {'ratio':>8} {'bytes':>8}", file=out)
    t0 = time.perf_counter()
    for bank in banks:
        cb = compress(bank, codec_cfg)
        rep = nmse_and_ratio(bank.C, reconstruct(cb), cb)
        bc = bank.config
        print(f"{bc.element.hpbw_deg:>6g} {bc.n_p_azi:>3}x{bc.n_p_ele:<3} {rep.nmse_db:>10.2f} "
              f"{100 * rep.ratio:>7.2f}% {100 * rep.byte_ratio:>7.2f}%", file=out)
        w.writerow([bc.element.hpbw_deg, bc.n_p_azi, bc.n_p_ele, repr(rep.nmse_db), repr(rep.ratio),
                    repr(rep.byte_ratio), rep.n_records])
    print(f"({time.perf_counter() - t0:.1f} s)", file=out)
    if args.out_dir is not None:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "codec.csv").write_text(buf.getvalue())
    return 0


def _cmd_run(args, out) -> int:
    cfg = _base_config(args)
    report, _ = run_montecarlo(cfg, threads=args.threads, out_dir=cfg.out_dir)
    print(report.to_text(), end="", file=out)
    print(f"wrote {Path(cfg.out_dir) / 'trials.csv'}", file=out)
    return 0


def _cmd_sweep(args, out) -> int:
    base = _base_config(args)
    to_keys = SWEEP_PARAMS[args.param]
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    root = Path(base.out_dir)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    metrics = None
    for v in values:
        cfg = config_from_mapping(to_keys(v), base)
        point_dir = root / f"{args.param}_{v}"
        report, _ = run_montecarlo(cfg, threads=args.threads, out_dir=point_dir)
        if metrics is None:
            metrics = list(report.metrics)
            w.writerow([args.param] + [f"{m}_{s}" for m in metrics for s in ("mean", "var")])
        w.writerow([v] + [repr(x) for m in metrics for x in (report[m].mean, report[m].variance)])
        line = "  ".join(f"{m}={report[m].mean:.3f}" for m in metrics)
        print(f"{args.param}={v}: {line}", file=out)
    root.mkdir(parents=True, exist_ok=True)
    (root / f"sweep_{args.param}.csv").write_text(buf.getvalue())
    return 0


def _cmd_report(args, out) -> int:
    report = summary_from_csv(args.csv)
    print(report.to_text(), end="", file=out)
    if args.out_dir is not None:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "summary.csv").write_text(report.to_csv())
        (d / "summary.txt").write_text(report.to_text())
    return 0


_COMMANDS = {"bank": _cmd_bank, "codec": _cmd_codec, "run": _cmd_run, "sweep": _cmd_sweep, "report": _cmd_report}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print("rprfas: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args, out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"rprfas: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
