"""CLI subcommands: artifacts, determinism, error reporting."""

import json
import subprocess
import sys

import pytest

from hetassoc.cli import main
from hetassoc.output import read_csv_rows

from conftest import CONFIG_DIR

ERLANG = str(CONFIG_DIR / "erlang_single.json")
HYBRID = str(CONFIG_DIR / "hybrid_example.json")


def run(*argv) -> int:
    return main(list(argv))


def test_validate_ok(capsys):
    assert run("validate", "--config", ERLANG) == 0
    out = capsys.readouterr().out
    assert "3 feasible states" in out


def test_validate_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "systems": [{"thresholds": [0.3, 0.7]}],
        "classes": [{"arrival_rate": 1.0, "peak_rates": [2.0]}],
        "t_min": 2.0, "t_max": 1.0, "service_rate": 1.0,
    }))
    assert run("validate", "--config", str(bad)) == 1
    assert "t_min exceeds t_max" in capsys.readouterr().err


def test_validate_missing_file(capsys):
    assert run("validate", "--config", "/nonexistent.json") == 1
    assert "error" in capsys.readouterr().err


def test_enumerate_writes_state_table(tmp_path):
    out = tmp_path / "o"
    assert run("enumerate", "--config", ERLANG, "--out", str(out)) == 0
    header, rows = read_csv_rows(out / "states.csv")
    assert header[:2] == ["id", "occ_users_cell"]
    assert len(rows) == 3
    text = (out / "states.csv").read_text()
    assert text.startswith("# hetassoc")
    assert '"t_min": 1.0' in text.splitlines()[1]


def test_steady_and_generator_export(tmp_path):
    out = tmp_path / "o"
    assert run("steady", "--config", ERLANG, "--rule", "policy",
               "--policy", "0,0,0", "--out", str(out), "--export-q") == 0
    header, rows = read_csv_rows(out / "steady.csv")
    probs = [float(r[2]) for r in rows]
    assert probs == pytest.approx([0.4, 0.4, 0.2], abs=1e-10)
    qlines = (out / "generator.txt").read_text().strip().splitlines()
    assert len(qlines) == 4  # two up edges, two down edges


def test_utility_table(tmp_path):
    out = tmp_path / "o"
    assert run("utility", "--config", ERLANG, "--rule", "policy",
               "--policy", "0,0,0", "--out", str(out)) == 0
    header, rows = read_csv_rows(out / "utility.csv")
    values = {int(r[0]): float(r[3]) for r in rows}
    assert values[1] == pytest.approx(5.0 / 3.0, abs=1e-10)
    assert values[2] == pytest.approx(4.0 / 3.0, abs=1e-10)


def test_policy_rule_requires_policy(capsys):
    assert run("steady", "--config", ERLANG, "--rule", "policy") == 1
    assert "--policy" in capsys.readouterr().err


def test_nash_outputs(tmp_path):
    out = tmp_path / "o"
    assert run("nash", "--config", ERLANG, "--out", str(out)) == 0
    doc = json.loads((out / "nash.json").read_text())
    assert doc["tool"].startswith("hetassoc")
    assert len(doc["equilibria"]) == 1
    assert doc["equilibria"][0]["policy"] == [[0, 0, 0]]
    header, rows = read_csv_rows(out / "nash.csv")
    assert rows[0][0] == "0,0,0"


def test_optimal_outputs(tmp_path):
    out = tmp_path / "o"
    assert run("optimal", "--config", ERLANG, "--out", str(out)) == 0
    doc = json.loads((out / "optimal.json").read_text())
    assert doc["policy"] == [[0, 0, 0]]
    assert doc["params"]["method"] == "exhaustive"


def test_baseline_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("baseline", "--config", ERLANG, "--which", "peak_rate",
               "--out", str(out)) == 0
    header, rows = read_csv_rows(out / "baseline_peak_rate.csv")
    assert float(rows[0][1]) == pytest.approx(0.96, abs=1e-9)
    assert float(rows[0][2]) == pytest.approx(0.2, abs=1e-10)


def test_control_outputs(tmp_path):
    out = tmp_path / "o"
    assert run("control", "--config", HYBRID, "--out", str(out),
               "--scheme", "0.3,0.7;0.3,0.7", "--scheme", "0,0;0,0",
               "--traffic", "2:2:1", "--restarts", "12") == 0
    header, rows = read_csv_rows(out / "control.csv")
    assert header[0] == "erlangs"
    assert len(rows) == 2
    argmin_rows = [r for r in rows if r[6] == "best"]
    assert len(argmin_rows) == 1
    doc = json.loads((out / "control.json").read_text())
    assert doc["sweep"][0]["best_thresholds"] is not None


def test_sweep_csv_and_svg(tmp_path):
    out = tmp_path / "o"
    assert run("sweep", "--config", HYBRID, "--traffic", "2:3:1",
               "--analyses", "nash,baselines", "--restarts", "12",
               "--out", str(out), "--svg") == 0
    header, rows = read_csv_rows(out / "sweep_utility.csv")
    assert header == ["erlangs", "utility_nash", "utility_peak_rate",
                      "utility_instantaneous_rate"]
    assert len(rows) == 2
    # nash should beat the peak baseline on the shipped instance
    assert float(rows[0][1]) > float(rows[0][2])
    svg = (out / "sweep_utility.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    blocking_header, _ = read_csv_rows(out / "sweep_blocking.csv")
    assert blocking_header[0] == "erlangs"


def test_sweep_with_control_analysis(tmp_path):
    out = tmp_path / "o"
    assert run("sweep", "--config", HYBRID, "--traffic", "2:3:1",
               "--analyses", "control", "--scheme", "0.3,0.7;0.3,0.7",
               "--scheme", "0,0;0,0", "--restarts", "12",
               "--out", str(out), "--svg") == 0
    header, rows = read_csv_rows(out / "sweep_control.csv")
    assert header == ["erlangs", "thresholds", "blocking", "utility",
                      "equilibria", "argmin"]
    assert len(rows) == 4  # two schemes at two traffic points
    assert sum(1 for r in rows if r[5] == "best") == 2
    svg = (out / "sweep_control.svg").read_text()
    assert "0.3,0.7;0.3,0.7" in svg


def test_sweep_with_optimal_analysis(tmp_path):
    out = tmp_path / "o"
    assert run("sweep", "--config", ERLANG, "--traffic", "1:2:1",
               "--analyses", "optimal,baselines", "--out", str(out)) == 0
    header, rows = read_csv_rows(out / "sweep_utility.csv")
    assert header[1] == "utility_optimal"
    # the single policy is trivially optimal and beats nothing by definition
    assert float(rows[0][1]) >= float(rows[0][2]) - 1e-9


def test_enumerate_capacity_error(tmp_path, capsys):
    assert run("enumerate", "--config", HYBRID, "--out", str(tmp_path),
               "--max-states", "10") == 1
    assert "ceiling" in capsys.readouterr().err


def test_control_rejects_bad_scheme_text(capsys):
    assert run("control", "--config", HYBRID, "--scheme", "0.3;0.7") == 1
    assert "low,high" in capsys.readouterr().err


def test_sweep_rejects_unknown_analysis(capsys):
    assert run("sweep", "--config", HYBRID, "--analyses", "nash,magic") == 1
    assert "magic" in capsys.readouterr().err


def test_sweep_parallel_jobs_match_serial(tmp_path):
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    for out, jobs in ((serial, "1"), (parallel, "2")):
        assert run("sweep", "--config", HYBRID, "--traffic", "2:3:1",
                   "--analyses", "baselines", "--jobs", jobs,
                   "--out", str(out)) == 0
    assert (serial / "sweep_utility.csv").read_bytes() == \
        (parallel / "sweep_utility.csv").read_bytes()


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_simulate_output(tmp_path):
    out = tmp_path / "o"
    assert run("simulate", "--config", ERLANG, "--rule", "policy",
               "--policy", "0,0,0", "--events", "80000", "--seed", "7",
               "--out", str(out)) == 0
    header, rows = read_csv_rows(out / "simulation.csv")
    blocking = [r for r in rows if r[0] == "blocking"][0]
    assert float(blocking[3]) == pytest.approx(0.2, abs=0.02)
    text = (out / "simulation.csv").read_text()
    assert '"seed": 7' in text


def test_sharing_override_changes_the_space(tmp_path, capsys):
    assert run("validate", "--config", HYBRID) == 0
    per_system = capsys.readouterr().out
    assert run("validate", "--config", HYBRID, "--sharing", "network") == 0
    network = capsys.readouterr().out
    assert per_system != network
    assert "119 feasible states" in per_system


def test_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "hetassoc.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "hetassoc" in proc.stdout


def test_sweep_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run("sweep", "--config", HYBRID, "--traffic", "2:2:1",
                   "--analyses", "nash", "--restarts", "12", "--seed", "3",
                   "--out", str(out)) == 0
    assert (a / "sweep_utility.csv").read_bytes() == (b / "sweep_utility.csv").read_bytes()
    assert (a / "sweep.json").read_bytes() == (b / "sweep.json").read_bytes()
