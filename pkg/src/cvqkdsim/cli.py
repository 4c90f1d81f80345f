"""Configuration-driven experiment runner.

Commands (installed as ``cvqkd``):

* ``skr``              closed-form key-rate reports at chosen distances
* ``sweep``            key rate over a distance grid
* ``simulate``         one end-to-end block: tx -> channel -> rx -> dsp
                       -> estimation -> security
* ``noise-timeseries`` repeated blocks with per-block (T, xi) estimates

All commands take ``--config`` (YAML overriding the defaults; unknown
keys are rejected by name), ``--seed``, ``--out`` and ``--fast``.  Exit
codes: 0 success, 2 configuration error, 3 runtime/stage error.
Identical config and seed produce byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from . import pipeline, rxsim
from .core import ParameterError
from .estimation import EstimationError, write_noise_csv
from .security import (KeyRateReport, NumericalDomainError, SecurityParams,
                       null_threshold, skr)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# reference operating points: injected excess noise per distance
DEFAULT_POINTS = ((50.0, 0.039), (75.0, 0.040), (100.0, 0.040))

SKR_CSV_FIELDS = ("distance_km", "T", "xi", "I_AB", "chi_EB", "skr_bps")
SYMBOL_CSV_FIELDS = ("index", "alice_x", "alice_p", "bob_x", "bob_p")
TIMESERIES_CSV_FIELDS = ("block_id", "xi_hat", "skr_bps", "running_mean_xi",
                         "running_mean_skr", "null_threshold")


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


# keys of the top-level schema that are plain SimConfig fields
_SIM_FIELDS = ("n_symbols", "v_mod", "n_training", "guard", "n_taps", "mu",
               "eta", "v_el", "beta")
_SUB_SECTIONS = ("tx", "channel", "detector", "plan")


def _coerce(value):
    # YAML 1.1 reads exponents like "10.0e9" (no sign) as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _check_section(name: str, mapping, allowed) -> dict:
    if not isinstance(mapping, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    out = {}
    for key, value in mapping.items():
        if key not in allowed:
            raise ConfigError(f"unknown configuration key '{name}.{key}'"
                              if name else f"unknown configuration key '{key}'")
        out[key] = value if isinstance(value, dict) else _coerce(value)
    return out


def load_config(path: str | Path | None, fast: bool,
                distance_km: float | None = None,
                xi: float | None = None) -> pipeline.SimConfig:
    """Build a SimConfig from defaults + YAML overrides.

    The schema mirrors :class:`~cvqkdsim.pipeline.SimConfig`: scalar
    fields at top level plus ``distance_km``/``xi`` shortcuts and the
    ``tx``/``channel``/``detector``/``plan`` sections with their
    dataclass field names.  Unknown keys raise :class:`ConfigError`
    naming the offending key.
    """
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML in {path}: {e}") from e
    allowed = set(_SIM_FIELDS) | set(_SUB_SECTIONS) | {"distance_km", "xi"}
    top = _check_section("", raw, allowed)

    if distance_km is None:
        distance_km = float(top.pop("distance_km", 50.0))
    else:
        top.pop("distance_km", None)
    if xi is None:
        xi = float(top.pop("xi", 0.04))
    else:
        top.pop("xi", None)

    sections = {}
    for name in _SUB_SECTIONS:
        if name in top:
            sections[name] = top.pop(name)

    try:
        cfg = pipeline.default_config(distance_km=distance_km, xi=xi,
                                      fast=False, **top)
        for name, mapping in sections.items():
            sub = getattr(cfg, name)
            fields = {f.name for f in dataclasses.fields(sub)}
            updates = _check_section(name, mapping, fields)
            cfg = dataclasses.replace(cfg, **{name: dataclasses.replace(
                sub, **updates)})
        if fast:
            cfg = pipeline.fast_config(cfg)
    except (ParameterError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e
    return cfg


def _security_params(cfg: pipeline.SimConfig, t: float, xi: float) -> SecurityParams:
    return SecurityParams(v_mod=cfg.v_mod, transmittance=t, xi=xi,
                          eta=cfg.eta, v_el=cfg.v_el, beta=cfg.beta,
                          symbol_rate=cfg.skr_rate)


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(fields)
        w.writerows(rows)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report_lines(report: KeyRateReport) -> list[str]:
    return [
        f"I_AB            {report.i_ab:.6f} bits/symbol",
        f"chi_EB          {report.chi_eb:.6f} bits/symbol",
        f"skr_per_symbol  {report.skr_per_symbol:.6f} bits",
        f"skr_bps         {report.skr_bps:.6g} bits/s",
    ]


def cmd_skr(args) -> int:
    if args.distance and args.xi and len(args.xi) not in (1, len(args.distance)):
        raise ConfigError("--xi must be given once or once per --distance")
    if args.distance:
        xis = (args.xi * len(args.distance) if args.xi and len(args.xi) == 1
               else args.xi)
        points = [(d, xis[i] if xis else None)
                  for i, d in enumerate(args.distance)]
    else:
        points = [(d, args.xi[0] if args.xi else x) for d, x in DEFAULT_POINTS]

    rows = []
    for dist, xi in points:
        cfg = load_config(args.config, args.fast, distance_km=dist, xi=xi)
        t = cfg.channel.transmittance_value
        xi_used = cfg.channel.xi_inject
        report = skr(_security_params(cfg, t, xi_used))
        rows.append([f"{dist:.6g}", f"{t:.8g}", f"{xi_used:.8g}",
                     f"{report.i_ab:.8g}", f"{report.chi_eb:.8g}",
                     f"{report.skr_bps:.8g}"])
        print(f"{dist:g} km: T={t:.4g} xi={xi_used:.4g} "
              f"SKR={report.skr_bps / 1e6:.4g} Mbps")
    _write_csv(_out_dir(args) / "skr.csv", SKR_CSV_FIELDS, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.step <= 0 or args.stop < args.start:
        raise ConfigError("sweep needs step > 0 and stop >= start")
    n = int(round((args.stop - args.start) / args.step)) + 1
    rows = []
    for k in range(n):
        dist = args.start + k * args.step
        cfg = load_config(args.config, args.fast, distance_km=dist)
        t = cfg.channel.transmittance_value
        xi_used = cfg.channel.xi_inject
        report = skr(_security_params(cfg, t, xi_used))
        rows.append([f"{dist:.6g}", f"{t:.8g}", f"{xi_used:.8g}",
                     f"{report.i_ab:.8g}", f"{report.chi_eb:.8g}",
                     f"{report.skr_bps:.8g}"])
    _write_csv(_out_dir(args) / "sweep.csv", SKR_CSV_FIELDS, rows)
    print(f"wrote {n} rows to {_out_dir(args) / 'sweep.csv'}")
    return EXIT_OK


def _run_stage(stage: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ParameterError, EstimationError, NumericalDomainError,
            RuntimeError, ArithmeticError, OSError) as e:
        raise StageError(f"stage '{stage}' failed: {e}") from e


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.fast)
    out = _out_dir(args)

    if args.replay_if:
        result = _run_stage("replay", _simulate_replayed, cfg, args)
    else:
        result = _run_stage("simulate", pipeline.simulate_once, cfg, args.seed)
        if args.save_if:
            _run_stage("save-if", _save_if_records, cfg, args)

    rows = [[i, f"{np.sqrt(2.0) * a.real:.6g}", f"{np.sqrt(2.0) * a.imag:.6g}",
             f"{bx:.6g}", f"{bp:.6g}"]
            for i, (a, bx, bp) in enumerate(zip(result.alice, result.bob_x,
                                                result.bob_p))]
    _write_csv(out / "symbols.csv", SYMBOL_CSV_FIELDS, rows)
    write_noise_csv(out / "noise.csv", [result.estimate],
                    [result.report.skr_bps])
    lines = [
        f"T_hat           {result.estimate.T_hat:.6g}",
        f"xi_hat          {result.estimate.xi_hat:.6g}",
        f"snu_scale       {result.snu_scale:.6g}",
        f"fo_hat          {result.fo_hat:.8g} Hz",
        f"pearson_before  {result.pearson_before:.4g}",
        f"pearson_after   {result.pearson_after:.4g}",
        *_report_lines(result.report),
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _save_if_records(cfg, args):
    from .core import derive_seeds, gaussian_symbols
    seeds = derive_seeds(args.seed)
    frame = gaussian_symbols(cfg.n_symbols, cfg.v_mod, seeds,
                             n_training=cfg.n_training)
    h_if, v_if = pipeline._transmit(cfg, seeds, frame, with_pilot=True,
                                    channel_noise=True, rx_noise=True)
    rxsim.save_if_records(args.save_if, [h_if, v_if], h_if.sample_rate)


def _simulate_replayed(cfg, args):
    """Re-run the DSP/estimation stages on persisted IF records.

    The config and seed must match the run that produced the records
    (the seed regenerates Alice's symbols for the data-aided stages).
    """
    from .core import derive_seeds, gaussian_symbols
    records, fs = rxsim.load_if_records(args.replay_if)
    if len(records) != 2:
        raise ParameterError("replay file must hold exactly 2 channels")
    if abs(fs - cfg.detector.adc_rate) > 1e-6 * cfg.detector.adc_rate:
        raise ParameterError(
            f"replay sample rate {fs:.6g} does not match the configured "
            f"ADC rate {cfg.detector.adc_rate:.6g}")
    h_if, v_if = records
    seeds = derive_seeds(args.seed)
    frame = gaussian_symbols(cfg.n_symbols, cfg.v_mod, seeds,
                             n_training=cfg.n_training)
    frozen = pipeline.build_frozen_dsp(cfg, frame, h_if, v_if)
    out_arr = frozen.apply(h_if, v_if)
    snu, var_vac, var_el = pipeline.chain_snu_scale(cfg, frozen, args.seed)
    a, y = pipeline._aligned(cfg, frozen, frame, out_arr)
    from .core import SymbolFrame
    from .estimation import estimate_channel
    bob_x, bob_p = y[0] / np.sqrt(snu), y[1] / np.sqrt(snu)
    est = estimate_channel(SymbolFrame(a), bob_x, bob_p, cfg.eta, cfg.v_el,
                           var_vacuum=var_vac / snu,
                           min_block=min(10_000, a.size))
    report = skr(pipeline.security_params(cfg, est))
    return pipeline.SimResult(
        estimate=est, report=report, alice=a, bob_x=bob_x, bob_p=bob_p,
        snu_scale=snu, v_el_hat=var_el / snu, fo_hat=frozen.fo_hat,
        pearson_before=float("nan"),
        pearson_after=float(np.corrcoef(np.sqrt(2.0) * a.real, bob_x)[0, 1]),
        eq_final_mse=frozen.weights.final_mse, sync_offset=frozen.offset)


def cmd_noise_timeseries(args) -> int:
    cfg = load_config(args.config, args.fast)
    estimates = _run_stage("noise-timeseries", pipeline.noise_timeseries,
                           cfg, args.blocks, args.seed)
    thresh = null_threshold(_security_params(
        cfg, cfg.channel.transmittance_value, cfg.channel.xi_inject))
    rows = []
    sum_xi = sum_skr = 0.0
    for est in estimates:
        report = skr(pipeline.security_params(cfg, est))
        sum_xi += est.xi_hat
        sum_skr += report.skr_bps
        k = est.block_id + 1
        rows.append([est.block_id, f"{est.xi_hat:.8g}",
                     f"{report.skr_bps:.8g}", f"{sum_xi / k:.8g}",
                     f"{sum_skr / k:.8g}", f"{thresh:.8g}"])
    _write_csv(_out_dir(args) / "timeseries.csv", TIMESERIES_CSV_FIELDS, rows)
    if rows:
        print(f"{len(rows)} blocks: mean xi {sum_xi / len(rows):.4g} SNU, "
              f"mean SKR {sum_skr / len(rows) / 1e6:.4g} Mbps, "
              f"null threshold {thresh:.4g} SNU")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkd", description="CV-QKD simulation and key-rate toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--fast", action="store_true",
                       help="scale all rates by 1/100 (identical records)")

    p = sub.add_parser("skr", help="closed-form key rates at distances")
    common(p)
    p.add_argument("--distance", type=float, action="append",
                   help="distance in km (repeatable)")
    p.add_argument("--xi", type=float, action="append",
                   help="excess noise in SNU (once, or once per distance)")
    p.set_defaults(func=cmd_skr)

    p = sub.add_parser("sweep", help="key rate over a distance grid")
    common(p)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=100.0)
    p.add_argument("--step", type=float, default=5.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="one end-to-end simulated block")
    common(p)
    p.add_argument("--save-if", default=None, metavar="PATH",
                   help="persist the simulated IF records")
    p.add_argument("--replay-if", default=None, metavar="PATH",
                   help="run DSP/estimation on persisted IF records")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("noise-timeseries", help="per-block noise estimates")
    common(p)
    p.add_argument("--blocks", type=int, default=10)
    p.set_defaults(func=cmd_noise_timeseries)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ParameterError, EstimationError, NumericalDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
