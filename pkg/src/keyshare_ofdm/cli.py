"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, sim
from .config import (
    DEFAULT, ConfigError, SystemConfig, coerce_field, db_to_linear,
    from_mapping, parse_config_text,
)
from .keyqueue import (
    MarkovParams, stationary_closed_form, stationary_exact, transition_matrix,
)
from .outage import (
    r_threshold, sop_ab_product_numeric, sop_ba_closed_form, sop_ba_high_snr,
    sop_wiretap_mc,
)
from .throughput import AnalyticEstimator, MonteCarloEstimator, optimize_grid

EXIT_CONFIG, EXIT_RUNTIME = 2, 3

PRESETS = {
    "figure5": dict(param="snr", grid="0:5:40dB", overrides={}),
    "figure6": dict(param="n_b", grid="2,4,6,8", overrides={}),
    "figure7": dict(param="rate_data", grid="0.5:0.5:10", overrides={"key_ratio": 3}),
    "figure8": dict(param="gap_ab", grid="1,2,4,8", overrides={}),
    "figure9": dict(param="n_data", grid="1:1:64", overrides={},
                    schemes=("fixed", "benchmark")),
    "figure10": dict(param="k", grid="1:1:10", overrides={},
                     schemes=("fixed", "dynamic")),
}


def parse_grid(spec: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list; a trailing ``dB``
    converts every value to linear."""
    s = spec.strip()
    to_linear = s.lower().endswith("db")
    if to_linear:
        s = s[:-2]
    try:
        if ":" in s:
            parts = [float(p) for p in s.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, step, stop = parts
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(p) for p in s.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"malformed grid spec {spec!r}") from None
    if not values:
        raise ConfigError("empty grid")
    return [db_to_linear(v) for v in values] if to_linear else values


def resolve_config(args) -> SystemConfig:
    base = DEFAULT
    preset = getattr(args, "preset", None)
    if preset:
        base = base.replace(**PRESETS[preset]["overrides"])
    if args.config:
        values = parse_config_text(Path(args.config).read_text())
        cfg = from_mapping(values, base if preset else None)
    else:
        cfg = base
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = coerce_field(key, value)
    return from_mapping(overrides, cfg) if overrides else cfg


def write_manifest(out: Path, args, cfg: SystemConfig, outputs, started: float):
    manifest = {
        "version": __version__,
        "subcommand": args.command,
        "argv": sys.argv[1:],
        "seed": args.seed,
        "config": cfg.as_dict(),
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": round(time.time() - started, 3),
    }
    path = out.with_name(out.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=list) + "\n")
    return path


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        w.writerows(rows)


SIMULATE_COLUMNS = ["scheme", "throughput", "ci95", "otp_fraction", "sop_events",
                    "outage_events", "key_arrivals", "slots", "seed", "n_data"]


def cmd_simulate(args) -> int:
    started = time.time()
    cfg = resolve_config(args)
    schemes = sim.SCHEMES if args.scheme == "all" else (args.scheme,)
    rows = []
    for scheme in schemes:
        rep = sim.run_scheme(cfg, scheme, args.slots,
                             np.random.default_rng(sim.point_seed(args.seed, 0)))
        rows.append({
            "scheme": scheme, "throughput": repr(rep.secure_throughput),
            "ci95": repr(rep.ci_95), "otp_fraction": repr(rep.otp_fraction),
            "sop_events": rep.sop_events, "outage_events": rep.outage_events,
            "key_arrivals": rep.key_arrivals, "slots": rep.slots,
            "seed": args.seed, "n_data": "" if rep.n_data is None else rep.n_data,
        })
        print(f"{scheme:9s} throughput={rep.secure_throughput:.4f} "
              f"+/-{rep.ci_95:.4f} bits/cu  otp={rep.otp_fraction:.3f}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, SIMULATE_COLUMNS, rows)
        write_manifest(out, args, cfg, [out], started)
    return 0


def cmd_sweep(args) -> int:
    started = time.time()
    preset = PRESETS.get(args.preset) if args.preset else None
    cfg = resolve_config(args)
    param = args.param or (preset and preset["param"])
    grid_spec = args.grid or (preset and preset["grid"])
    if not param or not grid_spec:
        raise ConfigError("sweep needs --param and --grid (or --preset)")
    grid = parse_grid(grid_spec)
    schemes = (tuple(args.schemes.split(",")) if args.schemes
               else (preset or {}).get("schemes", sim.SCHEMES))
    rows = sim.sweep(cfg, param, grid, args.slots, args.seed, schemes=schemes,
                     tune_fixed=not args.no_tune, tune_samples=args.tune_samples,
                     workers=args.workers)
    records = sim.sweep_records(rows)
    for r in rows:
        rep = r.report
        print(f"{param}={r.value:<10.4g} {rep.scheme:9s} "
              f"{rep.secure_throughput:.4f} +/-{rep.ci_95:.4f}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, sim.SWEEP_COLUMNS, records)
        write_manifest(out, args, cfg, [out], started)
    return 0


def cmd_optimize(args) -> int:
    started = time.time()
    cfg = resolve_config(args)
    if args.estimator == "analytic":
        est = AnalyticEstimator(cfg)
    else:
        est = MonteCarloEstimator(cfg, args.samples, np.random.default_rng(
            sim.point_seed(args.seed, 0)))
    res = optimize_grid(cfg, est)
    print(f"best N_data={res.best_n_data} K={res.best_k} "
          f"throughput={res.best_throughput:.4f} bits/cu")
    if args.out:
        out = Path(args.out)
        res.write_csv(out)
        write_manifest(out, args, cfg, [out], started)
    return 0


def cmd_markov(args) -> int:
    params = MarkovParams(args.lam, args.f, args.k, args.q_max)
    exact = stationary_exact(transition_matrix(params))
    closed = stationary_closed_form(args.lam, args.k, args.q_max)
    np.set_printoptions(precision=6, suppress=True, linewidth=120)
    print("exact      ", exact)
    print("closed form", closed)
    print(f"max |diff| = {np.max(np.abs(exact - closed)):.3e}")
    return 0


def cmd_sop(args) -> int:
    cfg = resolve_config(args)
    n_data = args.n_data or cfg.n_data_fixed
    print(f"R_th(N_data={n_data}) = {r_threshold(cfg, n_data):.6f} bits/cu")
    print(f"A->B wiretap SOP (numeric) = {sop_ab_product_numeric(cfg, n_data):.6g}")
    print(f"B->A SOP, one key sub-channel = "
          f"{sop_ba_closed_form(cfg.snr_bob, cfg.gap_ba, cfg.rate_key, cfg.n_subchannels, cfg.n_cp):.6g}"
          f"  (high-SNR {sop_ba_high_snr(cfg.rate_key, cfg.n_subchannels):.6g})")
    if args.trials:
        rng = np.random.default_rng(sim.point_seed(args.seed, 0))
        est = sop_wiretap_mc(cfg, "ab", "alice_best", cfg.rate_data,
                             args.trials, rng, size=n_data)
        print(f"A->B wiretap SOP (Monte Carlo, best N_data) = "
              f"{est.probability:.6g} +/- {est.std_error:.2g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (repeatable)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="keyshare-ofdm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common])
    s.add_argument("--scheme", choices=sim.SCHEMES + ("all",), default="all")
    s.add_argument("--slots", type=int, default=10_000)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common])
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--param", choices=sorted(sim.SWEEP_PARAMS))
    s.add_argument("--grid", help="start:step:stop or comma list, optional dB suffix")
    s.add_argument("--schemes", help="comma-separated subset of schemes")
    s.add_argument("--slots", type=int, default=10_000)
    s.add_argument("--no-tune", action="store_true",
                   help="keep the configured N_data for the fixed scheme")
    s.add_argument("--tune-samples", type=int, default=2000)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("optimize", parents=[common])
    s.add_argument("--estimator", choices=("mc", "analytic"), default="mc")
    s.add_argument("--samples", type=int, default=2000)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("markov")
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--f", type=float, default=1.0)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--q-max", type=int, default=10)
    s.set_defaults(func=cmd_markov)

    s = sub.add_parser("sop", parents=[common])
    s.add_argument("--n-data", type=int)
    s.add_argument("--trials", type=int, default=0)
    s.set_defaults(func=cmd_sop)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
