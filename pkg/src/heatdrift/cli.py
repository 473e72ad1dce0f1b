"""Command-line experiment runner.

Every subcommand writes CSV traces plus a ``manifest.json`` describing the
run into ``--out``. Outputs depend only on the configuration and the seed.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from heatdrift import BACKEND, __version__
from heatdrift.contraction import (
    fit_rate,
    phi_sq_total,
    running_slope,
    theoretical_exponent,
    variance_exponent,
    bias_exponent,
)
from heatdrift.ensemble import run_ensemble, write_ensemble_csv
from heatdrift.errors import HeatDriftError, ParameterError
from heatdrift.filter_core import run_filter
from heatdrift.frequentist import detect_t_star, moment_trace
from heatdrift.io import (
    BASE_COLUMNS,
    COMPONENT_COLUMNS,
    CONTRACTION_COLUMNS,
    PATH_COLUMNS,
    load_config,
    log_times,
    parse_config_text,
    read_csv,
    write_csv,
)
from heatdrift.simulator import simulate_mode, uniform_grid
from heatdrift.slow_manifold import reduced_trace
from heatdrift.spectral import truth_from_config
from heatdrift.stationary import stationary_trace

log = logging.getLogger("heatdrift")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

# Per-command defaults applied when neither the config file nor a flag sets the key.
COMMAND_DEFAULTS = {
    "figure1": {"t_end": 1e8},
    "contraction": {"t_end": 1e6, "k_max": 1 << 22},
}
FIGURE1_MODES = (1, 2, 4, 8)


class UsageError(HeatDriftError):
    pass


def parse_modes(text, k_max):
    """Parse ``"1,2,4"`` or ``"1-8"`` (or a mix) into a sorted mode list."""
    modes = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                modes.update(range(lo, hi + 1))
            else:
                modes.add(int(part))
        except ValueError:
            raise UsageError(f"bad mode specification {part!r}") from None
    if not modes:
        raise UsageError("empty mode list")
    bad = [k for k in modes if k < 1 or k > k_max]
    if bad:
        raise UsageError(f"modes {sorted(bad)} outside [1, k_max={k_max}]")
    return sorted(modes)


def resolve(args):
    """Build ``(config, modes, out_dir)`` from the parsed arguments."""
    overrides = {"seed": args.seed, "t_end": args.t_end, "k_max": args.k_max}
    explicit = {k for k, v in overrides.items() if v is not None}
    config = load_config(args.config, overrides)
    if args.config:
        explicit |= set(parse_config_text(Path(args.config).read_text()))
    defaults = {k: v for k, v in COMMAND_DEFAULTS.get(args.command, {}).items() if k not in explicit}
    if defaults:
        config = config.with_(**defaults)
    if args.modes is not None:
        modes = parse_modes(args.modes, config.k_max)
    elif args.command == "figure1":
        modes = [k for k in FIGURE1_MODES if k <= config.k_max]
        if len(modes) < len(FIGURE1_MODES):
            config = config.with_(k_max=max(config.k_max, max(FIGURE1_MODES)))
            modes = list(FIGURE1_MODES)
    else:
        modes = list(range(1, min(config.k_max, 8) + 1))
    if args.replicas is not None and args.replicas < 1:
        raise UsageError("--replicas must be >= 1")
    return config, modes, Path(args.out)


def pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def write_manifest(out, command, config, modes, extra=None):
    data = {
        "command": command,
        "config": asdict(config),
        "modes": list(modes),
        "version": __version__,
        "backend": BACKEND,
    }
    data.update(extra or {})
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _times(config, args):
    return np.concatenate([[0.0], log_times(config.t_end, args.per_decade)])


def cmd_simulate(args, config, modes, out):
    truth = truth_from_config(config)

    def one(k):
        return simulate_mode(k, truth[k], config.gamma, config.rho, uniform_grid(config.t_end, config.step(k)), config.seed)

    for path in pmap(one, modes, args.jobs):
        write_csv(out / f"path_k{path.k}.csv", PATH_COLUMNS, path.rows())
    write_manifest(out, "simulate", config, modes)


def cmd_filter(args, config, modes, out):
    truth = truth_from_config(config)
    t_out = _times(config, args)

    def one(k):
        path = simulate_mode(k, truth[k], config.gamma, config.rho, uniform_grid(config.t_end, config.step(k)), config.seed)
        return run_filter(k, path, config, t_out), moment_trace(k, config, t_out, truth[k])

    for ftr, dtr in pmap(one, modes, args.jobs):
        ftr.to_csv(out / f"filter_k{ftr.k}.csv", BASE_COLUMNS)
        dtr.to_csv(out / f"dynamic_k{dtr.k}.csv")
    write_manifest(out, "filter", config, modes)


def _deterministic(builder, variant):
    def run(args, config, modes, out):
        truth = truth_from_config(config)
        t_out = _times(config, args)
        for tr in pmap(lambda k: builder(k, config, t_out, truth[k]), modes, args.jobs):
            tr.to_csv(out / f"{variant}_k{tr.k}.csv")
        write_manifest(out, variant, config, modes)

    return run


def cmd_ensemble(args, config, modes, out):
    truth = truth_from_config(config)

    def one(k):
        h = config.step(k)
        path = simulate_mode(k, truth[k], config.gamma, config.rho, uniform_grid(config.t_end, h), config.seed)
        steps = np.unique(np.rint(_times(config, args) / h).astype(np.int64))
        steps = steps[steps <= len(path.dy)]
        return run_ensemble(k, config, args.particles, path.dy, h, steps * h)

    for k, table in zip(modes, pmap(one, modes, args.jobs)):
        write_ensemble_csv(out / f"ensemble_k{k}.csv", table)
    write_manifest(out, "ensemble", config, modes, {"particles": args.particles})


def contraction_window(config, t):
    """Last three decades of the run, starting no earlier than ``t*`` of mode 1."""
    t1 = moment_trace(1, config, t)
    t_star = detect_t_star(t, t1["k_f"]) or 0.0
    hi = float(t[-1])
    return max(hi / 1e3, t_star), hi, t_star


def cmd_contraction(args, config, modes, out):
    t = log_times(config.t_end, args.per_decade, t_start=min(1.0, config.t_end / 1e3))
    tr = phi_sq_total(t, config, rtol=args.rtol, K_limit=config.k_max)
    slopes = running_slope(t, tr.phi_sq_total)
    write_csv(
        out / "contraction.csv",
        CONTRACTION_COLUMNS,
        zip(t, tr.phi_sq_total, tr.K_used, tr.tail_bound, slopes),
    )
    write_csv(out / "components.csv", COMPONENT_COLUMNS, zip(t, tr.sigma_sum, tr.p_sum, tr.bias_sq_sum))
    lo, hi, t_star = contraction_window(config, t)
    summary = {
        "window": [lo, hi],
        "t_star_mode1": t_star,
        "window_decades": math.log10(hi / lo),
        "fitted_exponent": fit_rate(t, tr.phi_sq_total, (lo, hi), min_decades=1.0),
        "theoretical_exponent": theoretical_exponent(config.alpha, config.beta),
        "rtol": args.rtol,
        "K_max_used": int(tr.K_used.max()),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "contraction", config, modes, {"rtol": args.rtol})
    print(json.dumps(summary, indent=2, sort_keys=True))


def final_decade_slope(t, y):
    hi = float(t[-1])
    return fit_rate(t, y, (hi / 10.0, hi), min_decades=1.0)


def onset_time(t, sigma_f):
    """First time at which ``sigma_f`` has halved; a proxy for entering the decay regime."""
    idx = np.flatnonzero(sigma_f <= 0.5 * sigma_f[0])
    return float(t[idx[0]]) if len(idx) else math.inf


def cmd_figure1(args, config, modes, out):
    truth = truth_from_config(config)
    t_out = _times(config, args)

    def one(k):
        return moment_trace(k, config, t_out, truth[k]), stationary_trace(k, config, t_out, truth[k])

    rows = []
    for (dyn, sta) in pmap(one, modes, args.jobs):
        k = dyn.k
        dyn.to_csv(out / f"dynamic_k{k}.csv")
        sta.to_csv(out / f"stationary_k{k}.csv")
        bias = np.abs(dyn["m_f"] - truth[k])
        rows.append(
            {
                "k": k,
                "slope_sigma_f": final_decade_slope(t_out, dyn["sigma_f"]),
                "slope_bias": final_decade_slope(t_out, bias),
                "onset": onset_time(t_out, dyn["sigma_f"]),
                "p_f_below_sigma_f": bool(np.all(dyn["p_f"][1:] < dyn["sigma_f"][1:])),
            }
        )
    (out / "figure1_summary.json").write_text(json.dumps(rows, indent=2) + "\n")
    write_manifest(out, "figure1", config, modes)
    for r in rows:
        print(
            f"k={r['k']}: slope(sigma_f)={r['slope_sigma_f']:+.4f} slope(bias)={r['slope_bias']:+.4f} "
            f"onset={r['onset']:.4g} p_f<sigma_f={r['p_f_below_sigma_f']}"
        )


def report_rates(directory):
    """Text table of fitted versus theoretical exponents for the traces in ``directory``."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise UsageError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    alpha, beta = manifest["config"]["alpha"], manifest["config"]["beta"]
    lines = []
    found = False
    cpath = directory / "contraction.csv"
    if cpath.exists():
        found = True
        c = read_csv(cpath)
        comp = read_csv(directory / "components.csv")
        hi = c["t"][-1]
        lo = max(hi / 1e3, c["t"][0])
        span = min(3.0, math.log10(hi / lo))
        lines.append(f"{'quantity':<24}{'window':>24}{'fitted':>12}{'theory':>12}")
        for name, y, th in (
            ("phi^2 total", c["phi_sq_total"], theoretical_exponent(alpha, beta)),
            ("variance sum", comp["sigma_sum"], variance_exponent(alpha)),
            ("bias^2 sum", comp["bias_sq_sum"], bias_exponent(alpha, beta)),
        ):
            s = fit_rate(c["t"], y, (lo, hi), min_decades=span)
            lines.append(f"{name:<24}{f'[{lo:.3g}, {hi:.3g}]':>24}{s:>12.4f}{th:>12.4f}")
    mode_files = sorted(directory.glob("*_k*.csv"))
    mode_files = [p for p in mode_files if not p.name.startswith(("path_", "ensemble_", "filter_"))]
    if mode_files:
        found = True
        lines.append(f"{'trace':<24}{'window':>24}{'fitted':>12}{'theory':>12}")
        for p in mode_files:
            d = read_csv(p)
            k = int(d["k"][0])
            F = truth_from_config(load_config(None, manifest["config"]), k)[k]
            phi2 = d["sigma_f"] + d["p_f"] + (d["m_f"] - F) ** 2
            hi = d["t"][-1]
            s = fit_rate(d["t"], phi2, (hi / 10, hi), min_decades=1.0)
            lines.append(f"{p.stem:<24}{f'[{hi / 10:.3g}, {hi:.3g}]':>24}{s:>12.4f}{-1.0:>12.4f}")
    if not found:
        raise UsageError(f"no contraction or mode traces in {directory}")
    return "\n".join(lines)


def cmd_rates(args, config, modes, out):
    print(report_rates(out))


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "stationary": _deterministic(stationary_trace, "stationary"),
    "reduced": _deterministic(reduced_trace, "reduced"),
    "ensemble": cmd_ensemble,
    "contraction": cmd_contraction,
    "figure1": cmd_figure1,
    "rates": cmd_rates,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="heatdrift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default="out", help="output directory (input directory for 'rates')")
        p.add_argument("--modes", help="mode list, e.g. 1,2,4 or 1-8")
        p.add_argument("--replicas", type=int)
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--k-max", type=int, dest="k_max")
        p.add_argument("--rtol", type=float, default=1e-3)
        p.add_argument("--per-decade", type=int, default=50, dest="per_decade")
        p.add_argument("--particles", type=int, default=1000)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config, modes, out = resolve(args)
        log.info("backend=%s modes=%s t_end=%g", BACKEND, modes, config.t_end)
        COMMANDS[args.command](args, config, modes, out)
    except (UsageError, ParameterError) as exc:
        print(f"heatdrift: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeatDriftError as exc:
        where = ""
        if getattr(exc, "k", None) is not None or getattr(exc, "t", None) is not None:
            where = f" (k={getattr(exc, 'k', None)}, t={getattr(exc, 't', None)})"
        print(f"heatdrift: numerical error{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
