"""Experiment configs, seed sweeps, on-disk artifacts and run comparison reports.

A run directory holds ``manifest.json``, ``summary.csv`` and one
``seed_<k>/trace.jsonl`` per seed. Reports are recomputed from the stored
traces and manifests only.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import tomli

from . import __version__
from .ansatz import DEFAULT_INIT, LdcaSpec, build_brick_ansatz, build_ldca, build_uccsd_pool, build_upccgsd_pool, pool_to_circuit
from .circuit import LayeredCircuit
from .engine import PectConfig, PectTrace, run_layerwise_pect, run_pect
from .models import HubbardSpec, build_hubbard, build_tfim
from .optimizers import OptimizerConfig
from .oracle import ground_state
from .pauli import PauliParseError, PauliSum, load_pauli_sum
from .simulator import MAX_QUBITS, DimensionError

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "PECT_OUTPUT_ROOT"
DEFAULT_ACCURACY = 1.6e-3
MODES = ("pect", "dense", "layerwise_pect")
ANSATZE = ("ldca", "upccgsd", "uccsd_pool", "brick")
SUMMARY_COLUMNS = (
    "seed",
    "final_energy",
    "ed_energy",
    "abs_error",
    "mean_depth",
    "mean_depth_weighted",
    "final_depth",
    "two_qubit_count",
    "total_fevals",
    "t_proxy",
    "termination",
)
COMPARE_COLUMNS = (
    "baseline",
    "candidate",
    "baseline_mean_depth",
    "candidate_mean_depth",
    "depth_reduction_pct",
    "baseline_two_qubit_count",
    "candidate_two_qubit_count",
    "two_qubit_reduction_pct",
    "baseline_t_proxy",
    "candidate_t_proxy",
    "t_proxy_reduction_pct",
    "baseline_abs_error",
    "candidate_abs_error",
    "missed_threshold",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    hamiltonian: dict[str, Any]
    ansatz: dict[str, Any]
    mode: str = "pect"
    seeds: list[int] = field(default_factory=lambda: [0])
    pect: dict[str, Any] = field(default_factory=dict)
    optimizer: dict[str, Any] = field(default_factory=dict)
    layers_per_stage: int = 1
    accuracy_threshold: float = DEFAULT_ACCURACY
    output_dir: str = "runs/experiment"
    workers: int = 1
    base_dir: str = "."

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> "ExperimentConfig":
        data = copy.deepcopy(dict(data))
        known = {f.name for f in fields(cls)} - {"base_dir"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown key")
        for key in ("hamiltonian", "ansatz"):
            if key not in data:
                raise ConfigError(key, "missing section")
        cfg = cls(**data, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("base_dir")
        return out

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
        if not isinstance(self.seeds, list) or not self.seeds:
            raise ConfigError("seeds", "must be a non-empty list of integers")
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds", "must contain integers only")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "contains duplicates")
        if not self.accuracy_threshold > 0:
            raise ConfigError("accuracy_threshold", "must be positive")
        if self.layers_per_stage < 1:
            raise ConfigError("layers_per_stage", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        h = self.build_hamiltonian()
        circuit = self.build_circuit()
        if circuit.n_qubits != h.n_qubits:
            raise ConfigError(
                "ansatz", f"circuit acts on {circuit.n_qubits} qubits but the Hamiltonian on {h.n_qubits}"
            )
        self.pect_config(self.seeds[0], circuit)
        self.optimizer_config()

    # builders ---------------------------------------------------------------

    def build_hamiltonian(self) -> PauliSum:
        sec = dict(self.hamiltonian)
        if "file" in sec:
            path = Path(self.base_dir) / sec.pop("file")
            if sec:
                raise ConfigError(f"hamiltonian.{next(iter(sec))}", "not allowed together with file")
            if not path.is_file():
                raise ConfigError("hamiltonian.file", f"no such file {path}")
            try:
                return load_pauli_sum(path)
            except PauliParseError as exc:
                raise ConfigError("hamiltonian.file", str(exc)) from exc
        model = sec.pop("model", None)
        try:
            if model == "hubbard":
                spec = HubbardSpec(
                    int(sec.pop("sites")),
                    float(sec.pop("t", 1.0)),
                    float(sec.pop("u", 2.0)),
                    sec.pop("boundary", "open"),
                )
                h = build_hubbard(spec)
            elif model == "tfim":
                h = build_tfim(
                    int(sec.pop("n")), float(sec.pop("h")), sec.pop("boundary", "open"), float(sec.pop("coupling", 1.0))
                )
            else:
                raise ConfigError("hamiltonian.model", "must be 'hubbard' or 'tfim' (or give 'file')")
        except KeyError as exc:
            raise ConfigError(f"hamiltonian.{exc.args[0]}", "missing") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("hamiltonian", str(exc)) from exc
        if sec:
            raise ConfigError(f"hamiltonian.{next(iter(sec))}", "unknown key")
        return h

    def build_circuit(self) -> LayeredCircuit:
        sec = dict(self.ansatz)
        kind = sec.pop("kind", None)
        try:
            if kind == "ldca":
                c = build_ldca(
                    LdcaSpec(
                        int(sec.pop("n_qubits")),
                        int(sec.pop("superlayers", 1)),
                        sec.pop("initial_state", None),
                        bool(sec.pop("phase_layer", True)),
                    )
                )
            elif kind == "brick":
                c = build_brick_ansatz(
                    int(sec.pop("n_qubits")),
                    int(sec.pop("layers")),
                    sec.pop("initial_state", None),
                    sec.pop("rotation_axes", "YX"),
                )
            elif kind == "upccgsd":
                c = pool_to_circuit(
                    build_upccgsd_pool(int(sec.pop("n_spatial")), int(sec.pop("k", 1)), sec.pop("initial_state", None))
                )
            elif kind == "uccsd_pool":
                c = pool_to_circuit(build_uccsd_pool(int(sec.pop("n_occupied")), int(sec.pop("n_virtual"))))
            else:
                raise ConfigError("ansatz.kind", f"must be one of {', '.join(ANSATZE)}")
        except KeyError as exc:
            raise ConfigError(f"ansatz.{exc.args[0]}", "missing") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("ansatz", str(exc)) from exc
        if sec:
            raise ConfigError(f"ansatz.{next(iter(sec))}", "unknown key")
        return c

    def pect_config(self, seed: int, circuit: LayeredCircuit | None = None) -> PectConfig:
        sec = dict(self.pect)
        known = {f.name for f in fields(PectConfig)}
        for key in sec:
            if key not in known:
                raise ConfigError(f"pect.{key}", "unknown key")
        if "rng_seed" in sec:
            raise ConfigError("pect.rng_seed", "set seeds at the top level instead")
        sec.setdefault("init_range", DEFAULT_INIT.get(self._family(), (0.0, 4 * math.pi)))
        if "layer_init_ranges" in sec:
            sec["layer_init_ranges"] = {int(k): v for k, v in sec["layer_init_ranges"].items()}
        if self.mode == "dense":
            sec.update(s_global=0.0, n_prune=0)
        try:
            cfg = PectConfig(**sec, rng_seed=seed)
            if circuit is not None:
                n = circuit.n_params if self.mode != "layerwise_pect" else None
                if n is not None:
                    cfg.validate(n)
        except (TypeError, ValueError) as exc:
            raise ConfigError("pect", str(exc)) from exc
        return cfg

    def optimizer_config(self) -> OptimizerConfig:
        sec = dict(self.optimizer)
        known = {f.name for f in fields(OptimizerConfig)}
        for key in sec:
            if key not in known:
                raise ConfigError(f"optimizer.{key}", "unknown key")
        try:
            return OptimizerConfig(**sec)
        except (TypeError, ValueError) as exc:
            raise ConfigError("optimizer", str(exc)) from exc

    def _family(self) -> str:
        return {"uccsd_pool": "uccsd"}.get(self.ansatz.get("kind"), self.ansatz.get("kind", ""))

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            return Path(root) / out
        if not out.is_absolute():
            return Path(self.base_dir) / out
        return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=value`` with ``value`` read as a TOML literal, falling back to a bare string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(text, "empty key")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(data: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    data = copy.deepcopy(data)
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(".".join(path), f"{part} is not a section")
        node[path[-1]] = value
    return data


def load_config(path: str | os.PathLike | None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read a TOML config; ``overrides`` (``key=value``) take precedence over the file."""
    data: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("config", f"no such file {p}")
        try:
            data = tomli.loads(p.read_text())
        except tomli.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML: {exc}") from exc
        base = p.parent
    return ExperimentConfig.from_mapping(apply_overrides(data, overrides), base)


# --------------------------------------------------------------------------- running


@dataclass
class SeedRow:
    seed: int
    final_energy: float
    ed_energy: float | None
    abs_error: float | None
    mean_depth: float
    mean_depth_weighted: float
    final_depth: int
    two_qubit_count: int
    total_fevals: int
    t_proxy: int
    termination: str

    def csv_values(self) -> list[str]:
        out = []
        for name in SUMMARY_COLUMNS:
            v = getattr(self, name)
            out.append("n/a" if v is None else repr(v) if isinstance(v, float) else str(v))
        return out


@dataclass
class RunOutcome:
    output_dir: Path
    rows: list[SeedRow]
    ed_energy: float | None
    success_rate: float | None

    @property
    def success_line(self) -> str:
        if self.success_rate is None:
            return "success rate: n/a (no reference energy)"
        hits = round(self.success_rate * len(self.rows))
        return f"success rate: {hits}/{len(self.rows)} = {self.success_rate:.3f}"


def reference_energy(h: PauliSum) -> float | None:
    """Ground energy, or ``None`` with a warning when the register is too wide."""
    if h.n_qubits > MAX_QUBITS:
        log.warning("Hamiltonian has %d qubits (> %d): abs_error reported as n/a", h.n_qubits, MAX_QUBITS)
        return None
    try:
        return ground_state(h).ground_energy
    except (DimensionError, MemoryError) as exc:
        log.warning("reference energy unavailable (%s): abs_error reported as n/a", exc)
        return None


def _run_seed(cfg: ExperimentConfig, seed: int) -> PectTrace:
    h = cfg.build_hamiltonian()
    circuit = cfg.build_circuit()
    pcfg = cfg.pect_config(seed, circuit)
    ocfg = cfg.optimizer_config()
    if cfg.mode == "layerwise_pect":
        return run_layerwise_pect(circuit, h, pcfg, ocfg, cfg.layers_per_stage).trace
    return run_pect(circuit, h, pcfg, ocfg).trace


def row_from_trace(seed: int, trace: PectTrace, ed_energy: float | None) -> SeedRow:
    best = trace.records[trace.best_iteration]
    err = abs(trace.best_energy - ed_energy) if ed_energy is not None else None
    return SeedRow(
        seed=seed,
        final_energy=float(trace.best_energy),
        ed_energy=ed_energy,
        abs_error=err,
        mean_depth=float(trace.mean_depth()),
        mean_depth_weighted=float(trace.mean_depth(weighted=True)),
        final_depth=int(best.depth),
        two_qubit_count=int(best.two_qubit_count),
        total_fevals=int(trace.total_evals),
        t_proxy=int(trace.t_proxy),
        termination=trace.termination,
    )


def summary_csv(rows: Sequence[SeedRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def success_rate(rows: Sequence[SeedRow], threshold: float) -> float | None:
    errs = [r.abs_error for r in rows]
    if not errs or any(e is None for e in errs):
        return None
    return sum(e < threshold for e in errs) / len(errs)


def run_experiment(cfg: ExperimentConfig) -> RunOutcome:
    """Run every seed and write traces, ``summary.csv`` and ``manifest.json``."""
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.build_hamiltonian()
    ed = reference_energy(h)
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            traces = list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        traces = [_run_seed(cfg, s) for s in cfg.seeds]
    rows = []
    for seed, trace in zip(cfg.seeds, traces):
        d = out / f"seed_{seed}"
        d.mkdir(exist_ok=True)
        (d / "trace.jsonl").write_text(trace.to_jsonl())
        rows.append(row_from_trace(seed, trace, ed))
    (out / "summary.csv").write_text(summary_csv(rows))
    rate = success_rate(rows, cfg.accuracy_threshold)
    outcome = RunOutcome(out, rows, ed, rate)
    manifest = {
        "code_version": __version__,
        "config": cfg.to_dict(),
        "hamiltonian_fingerprint": h.fingerprint(),
        "n_qubits": h.n_qubits,
        "ed_energy": ed,
        "accuracy_threshold": cfg.accuracy_threshold,
        "success_rate": rate,
        "success_line": outcome.success_line,
        "seeds": list(cfg.seeds),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outcome


# --------------------------------------------------------------------------- reports


@dataclass
class RunSummary:
    path: Path
    fingerprint: str
    threshold: float
    rows: list[SeedRow]

    @property
    def mean_depth(self) -> float:
        return _mean(r.mean_depth for r in self.rows)

    @property
    def two_qubit_count(self) -> float:
        return _mean(r.two_qubit_count for r in self.rows)

    @property
    def t_proxy(self) -> float:
        return _mean(r.t_proxy for r in self.rows)

    @property
    def abs_error(self) -> float | None:
        errs = [r.abs_error for r in self.rows]
        return None if any(e is None for e in errs) else _mean(errs)

    @property
    def missed(self) -> bool:
        err = self.abs_error
        return err is None or err >= self.threshold


def _mean(values) -> float:
    vals = list(values)
    return sum(vals) / len(vals)


def load_run(path: str | os.PathLike) -> RunSummary:
    """Rebuild a run's per-seed rows from its manifest and stored traces."""
    p = Path(path)
    mpath = p / "manifest.json"
    if not mpath.is_file():
        raise FileNotFoundError(f"{p} has no manifest.json")
    manifest = json.loads(mpath.read_text())
    rows = []
    for seed in manifest["seeds"]:
        trace = PectTrace.from_jsonl((p / f"seed_{seed}" / "trace.jsonl").read_text())
        rows.append(row_from_trace(seed, trace, manifest["ed_energy"]))
    return RunSummary(p, manifest["hamiltonian_fingerprint"], manifest["accuracy_threshold"], rows)


def percent_reduction(baseline: float, candidate: float) -> float:
    if baseline == 0:
        return 0.0 if candidate == 0 else -math.inf
    return 100.0 * (baseline - candidate) / baseline


def compare_report(run_dirs: Sequence[str | os.PathLike]) -> str:
    """CSV comparing every later run against the first one.

    Raises:
        ValueError: fewer than two runs, or runs on different Hamiltonians.
    """
    if len(run_dirs) < 2:
        raise ValueError("need at least two runs to compare")
    runs = [load_run(d) for d in run_dirs]
    base = runs[0]
    for r in runs[1:]:
        if r.fingerprint != base.fingerprint:
            raise ValueError(f"{r.path} was run on a different Hamiltonian than {base.path}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    fmt = lambda v: "n/a" if v is None else repr(float(v))  # noqa: E731
    for cand in runs[1:]:
        w.writerow(
            [
                str(base.path),
                str(cand.path),
                fmt(base.mean_depth),
                fmt(cand.mean_depth),
                fmt(percent_reduction(base.mean_depth, cand.mean_depth)),
                fmt(base.two_qubit_count),
                fmt(cand.two_qubit_count),
                fmt(percent_reduction(base.two_qubit_count, cand.two_qubit_count)),
                fmt(base.t_proxy),
                fmt(cand.t_proxy),
                fmt(percent_reduction(base.t_proxy, cand.t_proxy)),
                fmt(base.abs_error),
                fmt(cand.abs_error),
                int(base.missed or cand.missed),
            ]
        )
    return buf.getvalue()


def dynamics_csv(trace: PectTrace) -> str:
    from .engine import parameter_dynamics

    curves = parameter_dynamics(trace)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration"] + [f"layer_{l}" for l in range(curves.shape[1])])
    for t, row in enumerate(curves):
        w.writerow([t] + [repr(float(v)) for v in row])
    return buf.getvalue()
