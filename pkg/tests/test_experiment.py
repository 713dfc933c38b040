from __future__ import annotations

import csv
import io
import json
import logging
import math

import numpy as np
import pytest

from pect.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from pect.engine import IterationRecord, PectTrace, parameter_dynamics
from pect.experiment import (
    OUTPUT_ROOT_ENV,
    SUMMARY_COLUMNS,
    ConfigError,
    ExperimentConfig,
    compare_report,
    load_config,
    reference_energy,
    row_from_trace,
    run_experiment,
)
from pect.models import HubbardSpec, build_hubbard
from pect.pauli import PauliSum, save_pauli_sum

CONFIG = """
mode = "pect"
seeds = [0, 1]
output_dir = "out"

[hamiltonian]
model = "hubbard"
sites = 2

[ansatz]
kind = "brick"
n_qubits = 4
layers = 2

[pect]
s_global = 0.3
n_prune = 2
h0 = 0.01
gradient = "adjoint"
max_iterations = 6
"""


@pytest.fixture
def config_file(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
    p = tmp_path / "exp.toml"
    p.write_text(CONFIG)
    return p


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _record(depth, evals, theta, energy=-1.0, two_q=0):
    return IterationRecord(
        iteration=0, stage=0, start_energy=0.0, energy=energy, best_energy=energy, evals=evals, total_evals=evals,
        depth=depth, two_qubit_count=two_q, threshold=0.01, next_threshold=None, active=[1], pruned=[0],
        survived=[1], grown=[0], opt_termination="gradient_tol", theta=theta,
    )


def _write_run(root, name, depth, h, ed=-1.0, energy=-1.0):
    d = root / name
    (d / "seed_0").mkdir(parents=True)
    tr = PectTrace([1], [_record(depth, 100, [0.5], energy, two_q=depth)], "converged", energy, 0)
    (d / "seed_0" / "trace.jsonl").write_text(tr.to_jsonl())
    manifest = {"seeds": [0], "ed_energy": ed, "hamiltonian_fingerprint": h.fingerprint(), "accuracy_threshold": 1.6e-3}
    (d / "manifest.json").write_text(json.dumps(manifest))
    return d


# --------------------------------------------------------------------------- config


def test_load_and_override(config_file):
    cfg = load_config(config_file, ["pect.s_global=0.5", "seeds=[3]", "ansatz.layers=3"])
    assert cfg.pect["s_global"] == 0.5
    assert cfg.seeds == [3]
    assert cfg.build_circuit().n_layers == 3
    assert cfg.pect_config(3).rng_seed == 3


def test_default_init_range_follows_ansatz(config_file):
    cfg = load_config(config_file)
    assert cfg.pect_config(0).init_range == (0.0, 2 * math.pi)


@pytest.mark.parametrize(
    "override, path",
    [
        ("seeds=[]", "seeds"),
        ("mode='sparse'", "mode"),
        ("pect.bogus=1", "pect.bogus"),
        ("ansatz.n_qubits=6", "ansatz"),
        ("ansatz.kind='qaoa'", "ansatz.kind"),
        ("hamiltonian.sites=1", "hamiltonian"),
        ("optimizer.kind='newton'", "optimizer"),
        ("extra=1", "extra"),
        ("pect.rng_seed=4", "pect.rng_seed"),
    ],
)
def test_config_errors_name_the_field(config_file, override, path):
    with pytest.raises(ConfigError) as info:
        load_config(config_file, [override])
    assert info.value.path == path


def test_missing_hamiltonian_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_mapping(
            {"hamiltonian": {"file": "nope.txt"}, "ansatz": {"kind": "brick", "n_qubits": 2, "layers": 1}}, tmp_path
        )
    assert info.value.path == "hamiltonian.file"


def test_hamiltonian_file_relative_to_config(tmp_path):
    save_pauli_sum(PauliSum.from_dict(2, {"Z0 Z1": -1.0, "X0": 0.5}), tmp_path / "h.txt")
    cfg = ExperimentConfig.from_mapping(
        {"hamiltonian": {"file": "h.txt"}, "ansatz": {"kind": "brick", "n_qubits": 2, "layers": 1}, "pect": {"n_prune": 1}},
        tmp_path,
    )
    assert cfg.build_hamiltonian().n_qubits == 2


def test_output_root_env(config_file, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert load_config(config_file).resolved_output_dir() == tmp_path / "root" / "out"
    monkeypatch.delenv(OUTPUT_ROOT_ENV)
    assert load_config(config_file).resolved_output_dir() == tmp_path / "out"


# --------------------------------------------------------------------------- runs


def test_run_writes_artifacts(config_file):
    cfg = load_config(config_file)
    outcome = run_experiment(cfg)
    out = outcome.output_dir
    rows = _read_csv(out / "summary.csv")
    assert list(rows[0]) == list(SUMMARY_COLUMNS)
    assert [int(r["seed"]) for r in rows] == [0, 1]
    for r in rows:
        assert float(r["abs_error"]) == pytest.approx(abs(float(r["final_energy"]) - (1 - math.sqrt(5))))
        assert float(r["ed_energy"]) == pytest.approx(1 - math.sqrt(5))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"] == cfg.to_dict()
    assert manifest["hamiltonian_fingerprint"] == build_hubbard(HubbardSpec(2)).fingerprint()
    assert manifest["code_version"]
    hits = sum(float(r["abs_error"]) < 1.6e-3 for r in rows)
    assert manifest["success_rate"] == hits / 2
    for seed in (0, 1):
        tr = PectTrace.from_jsonl((out / f"seed_{seed}" / "trace.jsonl").read_text())
        assert tr.records


def test_manifest_reproduces_run(config_file, tmp_path):
    first = run_experiment(load_config(config_file))
    manifest = json.loads((first.output_dir / "manifest.json").read_text())
    cfg = ExperimentConfig.from_mapping({**manifest["config"], "output_dir": str(tmp_path / "again")})
    second = run_experiment(cfg)
    for seed in manifest["seeds"]:
        a = (first.output_dir / f"seed_{seed}" / "trace.jsonl").read_bytes()
        b = (second.output_dir / f"seed_{seed}" / "trace.jsonl").read_bytes()
        assert a == b


def test_dense_versus_pect_depths(config_file, tmp_path):
    pect = run_experiment(load_config(config_file, ["seeds=[0]", f"output_dir='{tmp_path / 'p'}'"]))
    dense = run_experiment(load_config(config_file, ["seeds=[0]", "mode='dense'", f"output_dir='{tmp_path / 'd'}'"]))
    assert dense.rows[0].termination == "dense"
    assert pect.rows[0].mean_depth <= dense.rows[0].final_depth


def test_success_rate_over_ten_seeds(config_file, tmp_path):
    out = run_experiment(load_config(config_file, ["seeds=[1,2,3,4,5,6,7,8,9,10]", "pect.max_iterations=2",
                                                   f"output_dir='{tmp_path / 'sweep'}'"]))
    rate = sum(r.abs_error < 1.6e-3 for r in out.rows) / 10
    assert out.success_rate == rate
    assert out.success_line.startswith(f"success rate: {round(rate * 10)}/10")


def test_layerwise_mode(config_file, tmp_path):
    out = run_experiment(load_config(config_file, ["mode='layerwise_pect'", "seeds=[0]", "layers_per_stage=1",
                                                   f"output_dir='{tmp_path / 'lw'}'"]))
    tr = PectTrace.from_jsonl((out.output_dir / "seed_0" / "trace.jsonl").read_text())
    assert len(tr.stages) == 2


def test_reference_energy_overflow_is_na(caplog):
    wide = PauliSum.from_dict(21, {"Z0": 1.0})
    with caplog.at_level(logging.WARNING):
        assert reference_energy(wide) is None
    assert "n/a" in caplog.text
    tr = PectTrace([1], [_record(3, 10, [0.1])], "converged", -1.0, 0)
    row = row_from_trace(0, tr, None)
    assert row.abs_error is None
    assert "n/a" in row.csv_values()


# --------------------------------------------------------------------------- reports


def test_identical_runs_report_zero(tmp_path):
    h = build_hubbard(HubbardSpec(2))
    a = _write_run(tmp_path, "a", 10, h)
    b = _write_run(tmp_path, "b", 10, h)
    row = next(csv.DictReader(io.StringIO(compare_report([a, b]))))
    assert float(row["depth_reduction_pct"]) == 0.0
    assert float(row["two_qubit_reduction_pct"]) == 0.0
    assert float(row["t_proxy_reduction_pct"]) == 0.0


def test_known_depth_reduction(tmp_path):
    h = build_hubbard(HubbardSpec(2))
    dense = _write_run(tmp_path, "dense", 10, h)
    pect = _write_run(tmp_path, "pect", 8, h)
    row = next(csv.DictReader(io.StringIO(compare_report([dense, pect]))))
    assert float(row["depth_reduction_pct"]) == pytest.approx(20.0)
    assert float(row["t_proxy_reduction_pct"]) == pytest.approx(20.0)
    assert row["missed_threshold"] == "0"


def test_threshold_flag(tmp_path):
    h = build_hubbard(HubbardSpec(2))
    a = _write_run(tmp_path, "a", 10, h)
    b = _write_run(tmp_path, "b", 8, h, energy=-0.9)
    row = next(csv.DictReader(io.StringIO(compare_report([a, b]))))
    assert row["missed_threshold"] == "1"


def test_mismatched_hamiltonians(tmp_path):
    a = _write_run(tmp_path, "a", 10, build_hubbard(HubbardSpec(2)))
    b = _write_run(tmp_path, "b", 10, build_hubbard(HubbardSpec(2, 1.0, 3.0)))
    with pytest.raises(ValueError):
        compare_report([a, b])
    assert main(["report", str(a), str(b)]) == EXIT_FAILURE


def test_report_replays_real_runs(config_file, tmp_path):
    pect = run_experiment(load_config(config_file, [f"output_dir='{tmp_path / 'p'}'"]))
    dense = run_experiment(load_config(config_file, ["mode='dense'", f"output_dir='{tmp_path / 'd'}'"]))
    text = compare_report([dense.output_dir, pect.output_dir])
    assert text == compare_report([dense.output_dir, pect.output_dir])
    row = next(csv.DictReader(io.StringIO(text)))
    base = np.mean([r.mean_depth for r in dense.rows])
    cand = np.mean([r.mean_depth for r in pect.rows])
    assert float(row["depth_reduction_pct"]) == pytest.approx(100 * (base - cand) / base, rel=1e-12)
    tp_b = np.mean([r.t_proxy for r in dense.rows])
    tp_c = np.mean([r.t_proxy for r in pect.rows])
    assert float(row["t_proxy_reduction_pct"]) == pytest.approx(100 * (tp_b - tp_c) / tp_b, rel=1e-12)


# --------------------------------------------------------------------------- CLI


def test_cli_run_and_verbs(config_file, tmp_path, capsys):
    out = tmp_path / "cli_out"
    assert main(["run", str(config_file), "--output", str(out), "--set", "seeds=[0]"]) == EXIT_OK
    assert "success rate" in capsys.readouterr().out
    trace = out / "seed_0" / "trace.jsonl"
    assert main(["dynamics", str(trace), "--out", str(tmp_path / "dyn.csv")]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "dyn.csv")))
    curves = parameter_dynamics(PectTrace.from_jsonl(trace.read_text()))
    got = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    np.testing.assert_array_equal(got, curves)
    assert main(["oracle", str(config_file)]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(1 - math.sqrt(5), abs=1e-10)


def test_cli_config_errors(config_file, tmp_path, capsys):
    assert main(["run", str(config_file), "--set", "seeds=[]"]) == EXIT_CONFIG
    assert "seeds" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.toml"
    bad.write_text("mode = ")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert main(["dynamics", str(tmp_path / "none.jsonl")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_CONFIG


def test_cli_oracle_overflow(tmp_path, capsys):
    save_pauli_sum(PauliSum.from_dict(21, {"Z0": 1.0}), tmp_path / "wide.txt")
    cfg = tmp_path / "wide.toml"
    cfg.write_text('[hamiltonian]\nfile = "wide.txt"\n[ansatz]\nkind = "brick"\nn_qubits = 21\nlayers = 1\n')
    assert main(["oracle", str(cfg)]) == EXIT_FAILURE
    assert capsys.readouterr().out.strip() == "n/a"


def test_parallel_seeds_match_serial(config_file, tmp_path):
    serial = run_experiment(load_config(config_file, [f"output_dir='{tmp_path / 's'}'"]))
    parallel = run_experiment(load_config(config_file, ["workers=2", f"output_dir='{tmp_path / 'p'}'"]))
    for seed in (0, 1):
        a = (serial.output_dir / f"seed_{seed}" / "trace.jsonl").read_bytes()
        b = (parallel.output_dir / f"seed_{seed}" / "trace.jsonl").read_bytes()
        assert a == b
