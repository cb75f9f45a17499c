import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import zenokit as zk
from zenokit.cli import main
from zenokit.io import dump_json

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def run(argv, out_dir):
    return main([*argv, "--out", str(out_dir)])


def write_csv(path, header, rows):
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


GOLDEN_CASES = [
    ("predict", ["predict", "--config", str(DATA / "predict_config.json")]),
    ("predict_flat", ["predict", "--config", str(DATA / "predict_flat_config.json")]),
    ("calibrate", ["calibrate", "--config", str(DATA / "calibrate_config.json")]),
    ("oracle", ["oracle", "--config", str(DATA / "oracle_config.json")]),
    (
        "convert_t1",
        ["convert-t1", "--input", str(DATA / "convert_t1_input.csv"), "--t-delay", "30.0"],
    ),
    (
        "fit_swap",
        ["fit-swap", "--input", str(DATA / "swap_linecut.csv"), "--f-guess", "3.2"],
    ),
    ("flux_noise", ["fit-flux-noise", "--config", str(DATA / "flux_config.json")]),
]


class TestGoldenFiles:
    """Committed fixtures must reproduce committed outputs byte-exactly."""

    @pytest.mark.parametrize("name,argv", GOLDEN_CASES, ids=[c[0] for c in GOLDEN_CASES])
    def test_reproduces_golden(self, name, argv, tmp_path):
        assert run(argv, tmp_path) == 0
        expected_files = sorted(p.name for p in (GOLDEN / name).iterdir())
        produced_files = sorted(p.name for p in tmp_path.iterdir())
        assert produced_files == expected_files
        for filename in expected_files:
            assert (tmp_path / filename).read_bytes() == (
                GOLDEN / name / filename
            ).read_bytes(), f"{name}/{filename} differs from golden"


class TestPredict:
    def test_flat_spectrum_gives_constant_rates(self, tmp_path):
        assert run(["predict", "--config", str(DATA / "predict_flat_config.json")], tmp_path) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        assert payload["format"] == "zenokit-v1"
        rates = [row["gamma_per_us"] for row in payload["results"]]
        assert np.allclose(rates, 0.02, rtol=1e-8)

    def test_hotspot_curve_rises(self, tmp_path):
        assert run(["predict", "--config", str(DATA / "predict_config.json")], tmp_path) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        rates = [row["gamma_per_us"] for row in payload["results"]]
        assert all(b >= a for a, b in zip(rates, rates[1:]))
        assert rates[-1] > 2.0 * rates[0]

    def test_result_fields_and_order(self, tmp_path):
        run(["predict", "--config", str(DATA / "predict_config.json")], tmp_path)
        payload = json.loads((tmp_path / "predict.json").read_text())
        assert list(payload["results"][0]) == [
            "epsilon",
            "nbar",
            "stark_mhz",
            "gamma_phi_mhz",
            "gamma_raw_per_us",
            "norm",
            "gamma_per_us",
        ]

    def test_explicit_window_narrows_normalization(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            dump_json(
                {
                    "spectrum_csv": str(DATA / "spectrum_hotspot.csv"),
                    "calibration_json": str(DATA / "calibration.json"),
                    "qubit_freq_mhz": 4884.0,
                    "amplitudes": [0.05],
                    "window_mhz": [4883.0, 4885.0],
                    "resolution": 20001,
                }
            )
        )
        assert run(["predict", "--config", str(config)], tmp_path) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        norm = payload["results"][0]["norm"]
        # +-1 MHz window around a ~1 MHz-wide filter keeps well under
        # half the Lorentzian weight
        assert norm < 0.5

    def test_missing_input_exits_2(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            dump_json(
                {
                    "spectrum_csv": "nope.csv",
                    "calibration_json": str(DATA / "calibration.json"),
                    "qubit_freq_mhz": 4884.0,
                    "amplitudes": [0.0],
                }
            )
        )
        assert run(["predict", "--config", str(config)], tmp_path) == 2
        error = json.loads(capsys.readouterr().err)
        assert error["exit_code"] == 2

    def test_domain_error_exits_3(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            dump_json(
                {
                    "spectrum_csv": str(DATA / "spectrum_flat.csv"),
                    "calibration_json": str(DATA / "calibration.json"),
                    "qubit_freq_mhz": 4884.0,
                    "amplitudes": [-0.5],
                }
            )
        )
        assert run(["predict", "--config", str(config)], tmp_path) == 3
        error = json.loads(capsys.readouterr().err)
        assert error["error"] == "DomainError"

    def test_no_partial_outputs_on_failure(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            dump_json(
                {
                    "spectrum_csv": str(DATA / "spectrum_flat.csv"),
                    "calibration_json": str(DATA / "calibration.json"),
                    "qubit_freq_mhz": 4884.0,
                    "amplitudes": [0.0, -1.0],  # fails validation mid-command
                }
            )
        )
        out = tmp_path / "out"
        assert run(["predict", "--config", str(config)], out) == 3
        assert not out.exists() or list(out.iterdir()) == []


class TestConvertT1:
    def test_uniform_survival(self, tmp_path):
        source = tmp_path / "t1.csv"
        write_csv(source, "freq_mhz,p1", [(4000.0 + i, math.exp(-1.0)) for i in range(5)])
        assert run(["convert-t1", "--input", str(source), "--t-delay", "30.0"], tmp_path) == 0
        spectrum = zk.read_spectrum_csv(tmp_path / "spectrum.csv")
        assert np.allclose(spectrum.rates, 1.0 / 30.0, rtol=1e-12)

    def test_bad_population_names_row(self, tmp_path, capsys):
        source = tmp_path / "t1.csv"
        write_csv(source, "freq_mhz,p1", [(4000.0, 0.5), (4001.0, 1.2), (4002.0, 0.5)])
        assert run(["convert-t1", "--input", str(source), "--t-delay", "30.0"], tmp_path) == 3
        error = json.loads(capsys.readouterr().err)
        assert "row 2" in error["message"]

    def test_round_trip_recovers_rates(self, tmp_path):
        rates = np.linspace(0.01, 0.2, 30)
        freqs = np.linspace(4000.0, 4030.0, 30)
        source = tmp_path / "t1.csv"
        write_csv(source, "freq_mhz,p1", zip(freqs, np.exp(-rates * 30.0)))
        assert run(["convert-t1", "--input", str(source), "--t-delay", "30.0"], tmp_path) == 0
        spectrum = zk.read_spectrum_csv(tmp_path / "spectrum.csv")
        assert np.max(np.abs(spectrum.rates - rates) / rates) < 1e-12

    def test_wrong_header_exits_2(self, tmp_path):
        source = tmp_path / "t1.csv"
        write_csv(source, "freq,p1", [(1.0, 0.5), (2.0, 0.5)])
        assert run(["convert-t1", "--input", str(source), "--t-delay", "30.0"], tmp_path) == 2


class TestCalibrate:
    def test_recovers_generating_coefficients(self, tmp_path):
        assert run(["calibrate", "--config", str(DATA / "calibrate_config.json")], tmp_path) == 0
        payload = json.loads((tmp_path / "calibration.json").read_text())
        assert payload["S_mhz"] == pytest.approx(825.0, rel=1e-9)
        assert payload["K_mhz"] == pytest.approx(5619.0, rel=1e-6)
        assert payload["R_mhz"] == pytest.approx(429.0, rel=1e-9)
        reports = json.loads((tmp_path / "fit_reports.json").read_text())
        assert len(reports["traces"]) == 6
        assert all(entry["report"]["converged"] for entry in reports["traces"])

    def test_bad_trace_listed_in_error(self, tmp_path, capsys):
        traces = tmp_path / "traces"
        traces.mkdir()
        times = np.arange(0.0, 3.0, 0.004)
        good = 0.4 * np.cos(2 * math.pi * 10.0 * times) + 0.5
        for name, signal in (("good", good), ("flatline", np.full(times.size, 0.5))):
            write_csv(traces / f"{name}.csv", "time_us,signal", zip(times, signal))
            (traces / f"{name}.json").write_text(
                dump_json({"epsilon": 0.01, "offset_mhz": 10.0})
            )
        config = tmp_path / "config.json"
        config.write_text(dump_json({"chi_mhz": 0.98, "trace_dir": str(traces)}))
        assert run(["calibrate", "--config", str(config)], tmp_path) == 3
        error = json.loads(capsys.readouterr().err)
        assert "flatline.csv" in error["message"]

    def test_missing_sidecar_exits_2(self, tmp_path):
        traces = tmp_path / "traces"
        traces.mkdir()
        times = np.arange(0.0, 3.0, 0.01)
        write_csv(traces / "orphan.csv", "time_us,signal", zip(times, np.cos(times)))
        config = tmp_path / "config.json"
        config.write_text(dump_json({"chi_mhz": 0.98, "trace_dir": str(traces)}))
        assert run(["calibrate", "--config", str(config)], tmp_path) == 2


class TestOracleCommand:
    def test_boundary_step_size_exits_4(self, tmp_path, capsys):
        # at the largest step the precondition allows, the positivity
        # undershoot of oscillating populations exceeds tolerance
        scale = max(2.0 * 2 * math.pi * 1.6, 1 / 0.103)
        config = tmp_path / "config.json"
        config.write_text(
            dump_json(
                {
                    "defect": {"freq_mhz": 4300.0, "coupling_mhz": 1.6, "decay_per_us": 1 / 0.103},
                    "qubit_decay_per_us": 0.01,
                    "map_detunings_mhz": [0.0],
                    "map_dephasings_mhz": [0.0],
                    "dt_us": 0.05 / scale,
                }
            )
        )
        assert run(["oracle", "--config", str(config)], tmp_path / "out") == 4
        error = json.loads(capsys.readouterr().err)
        assert error["error"] == "StabilityError"
        assert "dt" in error["message"]

    def test_outputs_have_expected_headers(self, tmp_path):
        assert run(["oracle", "--config", str(DATA / "oracle_config.json")], tmp_path) == 0
        comparison = (tmp_path / "comparison.csv").read_text().splitlines()
        assert comparison[0] == "# zenokit-v1"
        assert comparison[1] == (
            "gamma_phi_mhz,detuning_mhz,kk_per_us,eq2_per_us,oracle_per_us,dev_kk,dev_eq2,flag"
        )
        zeno_map = (tmp_path / "zeno_map.csv").read_text().splitlines()
        assert zeno_map[1] == "detuning_mhz,gamma_phi_mhz,Gamma_per_us"
        assert len(zeno_map) == 2 + 5 * 3  # tag + header + row-major grid


class TestFitCommands:
    def test_fit_swap_recovers_coupling(self, tmp_path):
        assert run(
            ["fit-swap", "--input", str(DATA / "swap_linecut.csv"), "--f-guess", "3.2"],
            tmp_path,
        ) == 0
        payload = json.loads((tmp_path / "swap_fit.json").read_text())
        assert payload["coupling_mhz"] == pytest.approx(1.6, rel=0.02)
        assert payload["defect_decay_per_us"] == pytest.approx(1 / 0.103, rel=0.10)

    def test_fit_flux_noise_recovers_coefficient(self, tmp_path):
        assert run(["fit-flux-noise", "--config", str(DATA / "flux_config.json")], tmp_path) == 0
        payload = json.loads((tmp_path / "flux_noise_fit.json").read_text())
        assert payload["quadratic_coef_mhz"] == pytest.approx(0.3, rel=1e-6)
        assert len(payload["traces"]) == 4


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        result = subprocess.run(
            [
                sys.executable,
                "-m",
                "zenokit",
                "convert-t1",
                "--input",
                str(DATA / "convert_t1_input.csv"),
                "--t-delay",
                "30.0",
                "--out",
                str(tmp_path),
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert (tmp_path / "spectrum.csv").exists()

    def test_global_flags_before_subcommand(self, tmp_path):
        code = main(
            [
                "--out",
                str(tmp_path),
                "convert-t1",
                "--input",
                str(DATA / "convert_t1_input.csv"),
                "--t-delay",
                "30.0",
            ]
        )
        assert code == 0
        assert (tmp_path / "spectrum.csv").exists()
