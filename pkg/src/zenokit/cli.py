"""Command-line front end: calibrate, predict, and cross-check decay rates.

Subcommands
-----------
predict         spectrum CSV + calibration JSON -> decay-rate sweep
calibrate       Ramsey trace CSVs -> Stark/dephasing calibration JSON
oracle          defect parameters -> prediction-vs-density-matrix table
convert-t1      fixed-delay survival CSV -> decay-rate spectrum CSV
fit-swap        vacuum-Rabi linecut -> defect coupling and decay
fit-flux-noise  echo traces -> quadratic dephasing-vs-amplitude fit

Global flags ``--config``, ``--out`` and ``--seed`` may appear before or
after the subcommand.  Structured parameters live in the JSON config
file; paths inside it resolve relative to the config file's directory.
All referenced inputs are loaded and validated before any computation
runs, outputs are written atomically at the end, and identical inputs
produce byte-identical outputs.  Exit codes: 0 success, 2 parse error,
3 domain/fit error, 4 integrator stability error; failures emit a
machine-readable JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import kk
from .defect import DefectParams, decay_rate_map
from .errors import DomainError, FitError, ParseError, RangeError, StabilityError
from .fits import (
    RamseyTrace,
    ReadoutCalibration,
    fit_damped_sine,
    fit_dephasing_quadratic,
    fit_exponential,
    fit_flux_noise_quadratic,
    fit_stark_poly,
    fit_swap_chevron,
    rate_from_fixed_delay,
)
from .io import (
    COMPARISON_CSV_HEADER,
    FORMAT_TAG,
    POPULATION_CSV_HEADER,
    SWEEP_CSV_HEADER,
    T1_CSV_HEADER,
    TRACE_CSV_HEADER,
    ZENO_MAP_CSV_HEADER,
    atomic_write_text,
    calibration_to_json,
    dump_json,
    format_table_csv,
    read_calibration_json,
    read_columns_csv,
    read_sidecar_json,
    report_to_dict,
)
from .lindblad import validate_kk
from .spectrum import (
    ParametricSpectrum,
    TabulatedSpectrum,
    format_spectrum_csv,
    read_spectrum_csv,
)
from .units import angular_to_mhz, mhz_to_angular

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_STABILITY = 4


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(getattr(args, "out", "."))
    config_path = getattr(args, "config", None)
    try:
        if getattr(args, "seed", 0) < 0:
            raise ParseError("--seed must be a non-negative integer")
        config, config_dir = _load_config(config_path)
        outputs = args.handler(args, config, config_dir, out_dir)
        for path, text in outputs.items():
            atomic_write_text(path, text)
    except (ParseError, json.JSONDecodeError, OSError) as exc:
        return _fail(EXIT_PARSE, exc)
    except (DomainError, RangeError, FitError) as exc:
        return _fail(EXIT_DOMAIN, exc)
    except StabilityError as exc:
        return _fail(EXIT_STABILITY, exc)
    return EXIT_OK


def _fail(code: int, exc: Exception) -> int:
    sys.stderr.write(
        dump_json({"error": type(exc).__name__, "message": str(exc), "exit_code": code})
    )
    return code


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=Path, default=argparse.SUPPRESS, help="JSON config file"
    )
    common.add_argument(
        "--out", type=Path, default=argparse.SUPPRESS, help="output directory (default .)"
    )
    common.add_argument(
        "--seed",
        type=int,
        default=argparse.SUPPRESS,
        help="seed for commands with stochastic fixtures (reserved; all "
        "current commands are deterministic)",
    )
    parser = argparse.ArgumentParser(prog="zenokit", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", parents=[common], help="decay-rate sweep vs drive amplitude")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("calibrate", parents=[common], help="fit Ramsey traces to a calibration")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("oracle", parents=[common], help="density-matrix cross-check table")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("convert-t1", parents=[common], help="survival CSV -> spectrum CSV")
    p.add_argument("--input", type=Path, required=True, help="CSV with header freq_mhz,p1")
    p.add_argument("--t-delay", type=float, required=True, help="fixed delay in us")
    p.set_defaults(handler=cmd_convert_t1)

    p = sub.add_parser("fit-swap", parents=[common], help="fit a vacuum-Rabi linecut")
    p.add_argument("--input", type=Path, required=True, help="CSV with header time_us,p1")
    p.add_argument("--f-guess", type=float, required=True, help="expected oscillation freq, MHz")
    p.set_defaults(handler=cmd_fit_swap)

    p = sub.add_parser("fit-flux-noise", parents=[common], help="echo traces -> quadratic fit")
    p.set_defaults(handler=cmd_fit_flux_noise)

    return parser


def _load_config(config_path):
    if config_path is None:
        return None, None
    with open(config_path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{config_path}: {exc}") from None
    if not isinstance(config, dict):
        raise ParseError(f"{config_path}: config must be a JSON object")
    return config, Path(config_path).parent


def _require(config, key):
    if config is None:
        raise ParseError("this subcommand requires --config")
    if key not in config:
        raise ParseError(f"config: missing required key {key!r}")
    return config[key]


def _resolve(config_dir, path) -> Path:
    path = Path(path)
    if not path.is_absolute() and config_dir is not None:
        path = config_dir / path
    return path


def _as_float(config, key, default=None):
    value = config.get(key, default) if config else default
    if value is None and default is None:
        raise ParseError(f"config: missing required key {key!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"config: key {key!r} must be a number, got {value!r}") from None


def _trace_paths(config, config_dir) -> list[Path]:
    if config is not None and "traces" in config:
        paths = [_resolve(config_dir, p) for p in config["traces"]]
    elif config is not None and "trace_dir" in config:
        directory = _resolve(config_dir, config["trace_dir"])
        if not directory.is_dir():
            raise ParseError(f"trace directory {directory} does not exist")
        paths = sorted(directory.glob("*.csv"))
    else:
        raise ParseError("config: need either 'traces' (list) or 'trace_dir'")
    if not paths:
        raise ParseError("no trace files found")
    for p in paths:
        if not p.exists():
            raise ParseError(f"trace file {p} does not exist")
    return paths


# ---------------------------------------------------------------------------
# subcommands


def cmd_predict(args, config, config_dir, out_dir) -> dict[Path, str]:
    spectrum = read_spectrum_csv(_resolve(config_dir, _require(config, "spectrum_csv")))
    calibration = read_calibration_json(
        _resolve(config_dir, _require(config, "calibration_json"))
    )
    qubit_freq = mhz_to_angular(_as_float(config, "qubit_freq_mhz"))
    try:
        amplitudes = [float(a) for a in _require(config, "amplitudes")]
        window = None
        if config.get("window_mhz") is not None:
            lo, hi = config["window_mhz"]
            window = (mhz_to_angular(float(lo)), mhz_to_angular(float(hi)))
        resolution = int(config.get("resolution", kk.DEFAULT_RESOLUTION))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"config: {exc}") from None
    residual = mhz_to_angular(_as_float(config, "residual_dephasing_mhz", 0.0))

    results = kk.sweep(
        spectrum,
        calibration,
        qubit_freq,
        amplitudes,
        window=window,
        resolution=resolution,
        residual_dephasing=residual,
    )
    records = [
        {
            "epsilon": eps,
            "nbar": r.context.nbar,
            "stark_mhz": angular_to_mhz(r.context.freq - qubit_freq),
            "gamma_phi_mhz": angular_to_mhz(r.context.dephasing),
            "gamma_raw_per_us": r.raw_rate,
            "norm": r.norm,
            "gamma_per_us": r.rate,
        }
        for eps, r in zip(amplitudes, results)
    ]
    return {
        out_dir / "predict.json": dump_json({"format": FORMAT_TAG, "results": records}),
        out_dir / "predict.csv": format_table_csv(
            SWEEP_CSV_HEADER, [(r.context.nbar, r.rate) for r in results]
        ),
    }


def cmd_calibrate(args, config, config_dir, out_dir) -> dict[Path, str]:
    chi = mhz_to_angular(_as_float(config, "chi_mhz"))
    paths = _trace_paths(config, config_dir)

    loaded = []
    for path in paths:
        meta = read_sidecar_json(path)
        if "epsilon" not in meta or "offset_mhz" not in meta:
            raise ParseError(f"{path}: sidecar must carry 'epsilon' and 'offset_mhz'")
        try:
            offset = float(meta["offset_mhz"])
            epsilon = float(meta["epsilon"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: sidecar: {exc}") from None
        times, signal = read_columns_csv(path, TRACE_CSV_HEADER)
        loaded.append((path, RamseyTrace(times, signal, offset_freq=offset, epsilon=epsilon)))

    entries, failures = [], []
    for path, trace in loaded:
        try:
            shift_mhz, rate, report = fit_damped_sine(trace)
        except FitError as exc:
            failures.append(f"{path.name}: {exc}")
            continue
        entries.append((path, trace.epsilon, shift_mhz, rate, report))
    if failures:
        raise FitError("trace fits failed for: " + "; ".join(failures))

    stark_points = [(eps, mhz_to_angular(shift)) for _, eps, shift, _, _ in entries]
    dephasing_points = [(eps, rate) for _, eps, _, rate, _ in entries]
    stark_quad, stark_quartic, stark_report = fit_stark_poly(stark_points)
    dephasing_quad, dephasing_report = fit_dephasing_quadratic(dephasing_points)
    calibration = ReadoutCalibration(
        stark_quad=stark_quad,
        stark_quartic=stark_quartic,
        dephasing_quad=dephasing_quad,
        chi=chi,
        max_epsilon=max(eps for _, eps, *_ in entries),
    )

    reports = {
        "format": FORMAT_TAG,
        "traces": [
            {
                "file": path.name,
                "epsilon": eps,
                "stark_mhz": shift,
                "gamma_phi_mhz": angular_to_mhz(rate),
                "report": report_to_dict(report),
            }
            for path, eps, shift, rate, report in entries
        ],
        "stark_fit": report_to_dict(stark_report),
        "dephasing_fit": report_to_dict(dephasing_report),
    }
    return {
        out_dir / "calibration.json": calibration_to_json(calibration),
        out_dir / "fit_reports.json": dump_json(reports),
    }


def cmd_oracle(args, config, config_dir, out_dir) -> dict[Path, str]:
    defect_cfg = _require(config, "defect")
    defect = DefectParams(
        freq=mhz_to_angular(_as_float(defect_cfg, "freq_mhz")),
        coupling=mhz_to_angular(_as_float(defect_cfg, "coupling_mhz")),
        decay=_as_float(defect_cfg, "decay_per_us"),
    )
    qubit_decay = _as_float(config, "qubit_decay_per_us", 0.0)

    try:
        map_detunings = [mhz_to_angular(float(x)) for x in _require(config, "map_detunings_mhz")]
        map_dephasings = [
            mhz_to_angular(float(x)) for x in _require(config, "map_dephasings_mhz")
        ]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"config: {exc}") from None
    grid = decay_rate_map(map_detunings, map_dephasings, defect, qubit_decay)
    map_rows = [
        (angular_to_mhz(det), angular_to_mhz(gphi), grid[i, j])
        for i, det in enumerate(map_detunings)
        for j, gphi in enumerate(map_dephasings)
    ]

    try:
        oracle_detunings = [
            mhz_to_angular(float(x))
            for x in config.get("oracle_detunings_mhz", config["map_detunings_mhz"])
        ]
        oracle_dephasings = [
            mhz_to_angular(float(x))
            for x in config.get("oracle_dephasings_mhz", config["map_dephasings_mhz"])
        ]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"config: {exc}") from None
    contexts = [
        kk.MeasurementContext(freq=defect.freq + det, dephasing=gphi)
        for det in oracle_detunings
        for gphi in oracle_dephasings
    ]
    spectrum = ParametricSpectrum(background=qubit_decay, peaks=(defect.spectral_peak(),))
    try:
        dt = config.get("dt_us")
        dt = None if dt is None else float(dt)
        resolution = int(config.get("resolution", 20001))
        n_trunc = int(config.get("n_trunc", 2))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"config: {exc}") from None
    rows = validate_kk(
        spectrum,
        defect,
        contexts,
        qubit_decay=qubit_decay,
        resolution=resolution,
        dt=dt,
        n_trunc=n_trunc,
    )
    comparison_rows = [
        (
            angular_to_mhz(r.dephasing),
            angular_to_mhz(r.detuning),
            r.kk_rate,
            r.purcell_rate,
            r.oracle_rate,
            r.dev_kk,
            r.dev_purcell,
            r.flagged,
        )
        for r in rows
    ]
    return {
        out_dir / "comparison.csv": format_table_csv(COMPARISON_CSV_HEADER, comparison_rows),
        out_dir / "zeno_map.csv": format_table_csv(ZENO_MAP_CSV_HEADER, map_rows),
    }


def cmd_convert_t1(args, config, config_dir, out_dir) -> dict[Path, str]:
    freqs, populations = read_columns_csv(args.input, T1_CSV_HEADER)
    if np.any(np.diff(freqs) <= 0):
        raise ParseError(f"{args.input}: frequencies must be strictly ascending")
    if not args.t_delay > 0:
        raise DomainError(f"--t-delay must be > 0, got {args.t_delay}")
    rates = []
    for i, p1 in enumerate(populations):
        try:
            rates.append(rate_from_fixed_delay(float(p1), args.t_delay))
        except DomainError as exc:
            raise DomainError(f"{args.input}: row {i + 1} (freq {freqs[i]} MHz): {exc}") from None
    spectrum = TabulatedSpectrum(mhz_to_angular(freqs), np.asarray(rates))
    return {out_dir / "spectrum.csv": format_spectrum_csv(spectrum, tag=FORMAT_TAG)}


def cmd_fit_swap(args, config, config_dir, out_dir) -> dict[Path, str]:
    times, populations = read_columns_csv(args.input, POPULATION_CSV_HEADER)
    coupling, defect_decay, report = fit_swap_chevron(times, populations, args.f_guess)
    payload = {
        "format": FORMAT_TAG,
        "coupling_mhz": angular_to_mhz(coupling),
        "defect_decay_per_us": defect_decay,
        "report": report_to_dict(report),
    }
    return {out_dir / "swap_fit.json": dump_json(payload)}


def cmd_fit_flux_noise(args, config, config_dir, out_dir) -> dict[Path, str]:
    paths = _trace_paths(config, config_dir)
    loaded = []
    for path in paths:
        meta = read_sidecar_json(path)
        if "flux_amp" not in meta:
            raise ParseError(f"{path}: sidecar must carry 'flux_amp'")
        try:
            flux_amp = float(meta["flux_amp"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: sidecar: {exc}") from None
        times, signal = read_columns_csv(path, TRACE_CSV_HEADER)
        loaded.append((path, flux_amp, times, signal))

    points, per_trace, failures = [], [], []
    for path, amp, times, signal in loaded:
        try:
            rate, report = fit_exponential(times, signal)
        except FitError as exc:
            failures.append(f"{path.name}: {exc}")
            continue
        points.append((amp, rate))
        per_trace.append(
            {
                "file": path.name,
                "flux_amp": amp,
                "gamma_phi_mhz": angular_to_mhz(rate),
                "report": report_to_dict(report),
            }
        )
    if failures:
        raise FitError("echo fits failed for: " + "; ".join(failures))

    coefficient, fit_report = fit_flux_noise_quadratic(points)
    payload = {
        "format": FORMAT_TAG,
        "quadratic_coef_mhz": angular_to_mhz(coefficient),
        "traces": per_trace,
        "report": report_to_dict(fit_report),
    }
    return {out_dir / "flux_noise_fit.json": dump_json(payload)}


if __name__ == "__main__":
    sys.exit(main())
