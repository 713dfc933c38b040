"""Parameter-efficient circuit training: sparse local optimization with prune/grow reallocation.

Each iteration optimizes only the active slots of a :class:`SparseParamState`,
prunes active values whose magnitude is below the current threshold, adapts
the threshold toward the target prune count and regrows the same number of
slots, distributed over layers in proportion to their surviving parameters.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .circuit import LayeredCircuit, SparseParamState, depth, realize, two_qubit_gate_count
from .optimizers import OptimizerConfig, minimize
from .pauli import PauliSum
from .simulator import CircuitEnergy, EvalCounter

log = logging.getLogger(__name__)

NEAR_IDENTITY_RANGE = (0.0, 0.02)


class InvariantError(RuntimeError):
    """A reallocation bookkeeping invariant was violated."""


@dataclass
class PectConfig:
    s_global: float = 0.5
    n_prune: int = 10
    h0: float = 0.01
    delta: float = 0.1
    max_total_function_evals: int = 500_000
    convergence_tol: float = 1e-8
    convergence_window: int = 3
    oscillation_tol: float = 1e-6
    oscillation_window: int = 4
    max_iterations: int = 200
    rng_seed: int = 0
    init_range: tuple[float, float] = (0.0, 4 * math.pi)
    layer_init_ranges: dict[int, tuple[float, float]] = field(default_factory=dict)
    gradient: str = "parameter_shift"
    fd_step: float = 1e-6
    threshold_factor: float = 2.0
    avoid_regrowing_pruned: bool = True

    def __post_init__(self):
        if not 0.0 <= self.s_global < 1.0:
            raise ValueError("s_global must lie in [0, 1)")
        if self.n_prune < 0:
            raise ValueError("n_prune must be non-negative")
        if self.h0 <= 0:
            raise ValueError("h0 must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.max_total_function_evals < 1 or self.max_iterations < 1:
            raise ValueError("evaluation and iteration limits must be positive")
        if self.threshold_factor <= 1:
            raise ValueError("threshold_factor must exceed 1")
        self.init_range = tuple(self.init_range)
        self.layer_init_ranges = {int(k): tuple(v) for k, v in self.layer_init_ranges.items()}

    def subset_size(self, n_params: int) -> int:
        return round_half_up(Fraction(1) - _frac(self.s_global), n_params)

    def validate(self, n_params: int) -> None:
        m = self.subset_size(n_params)
        if m < 1:
            raise ValueError(f"sparsity {self.s_global} leaves no active parameter out of {n_params}")
        if self.n_prune > m:
            raise ValueError(f"n_prune={self.n_prune} exceeds the subset size {m}")

    def init_range_for(self, layer: int) -> tuple[float, float]:
        return self.layer_init_ranges.get(layer, self.init_range)


def _frac(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def round_half_up(scale: Fraction, n: int) -> int:
    return math.floor(scale * n + Fraction(1, 2))


def largest_remainder(shares: Sequence[Fraction], total: int) -> list[int]:
    """Integer split of ``shares`` summing to ``total``; ties go to the lowest index."""
    floors = [math.floor(s) for s in shares]
    left = total - sum(floors)
    if left < 0 or left > len(shares):
        raise InvariantError(f"cannot round shares {shares} to total {total}")
    order = sorted(range(len(shares)), key=lambda i: (-(shares[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


# --------------------------------------------------------------------------- reallocation steps


def init_subset(
    layer_sizes: Sequence[int],
    cfg: PectConfig,
    rng: np.random.Generator,
    layers: Iterable[int] | None = None,
    init_range: tuple[float, float] | None = None,
) -> SparseParamState:
    """Sample the initial active slots per layer and their starting values.

    Only ``layers`` (default: all) receive slots; per-layer counts are the
    largest-remainder split of ``(1 - s) * N_l`` that sums to
    ``round((1 - s) * N)`` over the eligible layers.
    """
    sizes = list(layer_sizes)
    layers = list(range(len(sizes))) if layers is None else sorted(layers)
    for l in layers:
        if sizes[l] == 0:
            raise ValueError(f"layer {l} has no parameters")
    keep = Fraction(1) - _frac(cfg.s_global)
    n_elig = sum(sizes[l] for l in layers)
    total = round_half_up(keep, n_elig)
    counts = largest_remainder([keep * sizes[l] for l in layers], total)
    psi = [np.zeros(0, dtype=np.int64) for _ in sizes]
    phi = [np.zeros(0) for _ in sizes]
    for l, m in zip(layers, counts):
        psi[l] = np.sort(rng.choice(sizes[l], size=m, replace=False))
        lo, hi = init_range if init_range is not None else cfg.init_range_for(l)
        phi[l] = rng.uniform(lo, hi, size=m)
    return SparseParamState(sizes, psi, phi)


def prune(state: SparseParamState, threshold: float) -> tuple[SparseParamState, list[int], list[int], list[np.ndarray]]:
    """Drop active values with ``|value| < threshold``.

    Returns the pruned state, per-layer pruned counts ``K``, survivor counts
    ``R`` and the removed slot indices.
    """
    psi, phi, pruned_k, survived, removed = [], [], [], [], []
    for idx, val in zip(state.psi, state.phi):
        drop = np.abs(val) < threshold
        psi.append(idx[~drop])
        phi.append(val[~drop])
        removed.append(idx[drop])
        pruned_k.append(int(drop.sum()))
        survived.append(int((~drop).sum()))
    return SparseParamState(state.layer_sizes, psi, phi), pruned_k, survived, removed


def update_threshold(n_pruned: int, threshold: float, n_target: int, delta: float, factor: float = 2.0) -> float:
    """Halve the threshold after over-pruning, double it after under-pruning."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if n_pruned > (1 + delta) * n_target:
        return threshold / factor
    if n_pruned < (1 - delta) * n_target:
        return threshold * factor
    return threshold


def growth_counts(
    pruned: Sequence[int],
    survived: Sequence[int],
    capacity: Sequence[int],
    rng: np.random.Generator,
) -> list[int]:
    """Per-layer regrowth ``G_l`` proportional to survivors, summing to ``sum(pruned)``.

    Shares beyond a layer's free capacity, and the whole budget when nothing
    survived, are handed out one slot at a time to uniformly chosen layers
    that still have room.
    """
    total = int(sum(pruned))
    n_surv = int(sum(survived))
    if n_surv > 0:
        grow = largest_remainder([Fraction(r * total, n_surv) for r in survived], total)
    else:
        grow = [0] * len(survived)
    excess = total - sum(grow)
    for l, cap in enumerate(capacity):
        if grow[l] > cap:
            excess += grow[l] - cap
            grow[l] = cap
    while excess:
        open_layers = [l for l, cap in enumerate(capacity) if grow[l] < cap]
        if not open_layers:
            raise InvariantError("no free slot left to regrow into")
        grow[open_layers[int(rng.integers(len(open_layers)))]] += 1
        excess -= 1
    return grow


def grow(
    state: SparseParamState,
    pruned: Sequence[int],
    survived: Sequence[int],
    rng: np.random.Generator,
    removed: Sequence[np.ndarray] | None = None,
    layers: Iterable[int] | None = None,
    avoid_removed: bool = True,
) -> tuple[SparseParamState, list[int]]:
    """Activate ``sum(pruned)`` new slots at value 0; returns the new state and ``G``."""
    n_layers = state.n_layers
    eligible = set(range(n_layers)) if layers is None else set(layers)
    capacity = [
        (state.layer_sizes[l] - len(state.psi[l])) if l in eligible else 0 for l in range(n_layers)
    ]
    counts = growth_counts(pruned, survived, capacity, rng)
    psi, phi = [], []
    for l in range(n_layers):
        g = counts[l]
        idx, val = state.psi[l], state.phi[l]
        if g == 0:
            psi.append(idx)
            phi.append(val)
            continue
        free = np.setdiff1d(np.arange(state.layer_sizes[l]), idx)
        if avoid_removed and removed is not None and len(removed[l]):
            fresh = np.setdiff1d(free, removed[l])
            if len(fresh) >= g:
                new = rng.choice(fresh, size=g, replace=False)
            else:
                stale = np.setdiff1d(free, fresh)
                new = np.concatenate([fresh, rng.choice(stale, size=g - len(fresh), replace=False)])
        else:
            new = rng.choice(free, size=g, replace=False)
        merged = np.concatenate([idx, new.astype(np.int64)])
        order = np.argsort(merged, kind="stable")
        psi.append(merged[order])
        phi.append(np.concatenate([val, np.zeros(g)])[order])
    return SparseParamState(state.layer_sizes, psi, phi), counts


# --------------------------------------------------------------------------- trace


@dataclass
class IterationRecord:
    iteration: int
    stage: int
    start_energy: float
    energy: float
    best_energy: float
    evals: int
    total_evals: int
    depth: int
    two_qubit_count: int
    threshold: float
    next_threshold: float | None
    active: list[int]
    pruned: list[int]
    survived: list[int]
    grown: list[int]
    opt_termination: str
    theta: list[float]


@dataclass
class PectTrace:
    layer_sizes: list[int]
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = ""
    best_energy: float = math.inf
    best_iteration: int = -1
    best_state: SparseParamState | None = None
    dense_depth: int = 0
    dense_two_qubit_count: int = 0
    stages: list[dict] = field(default_factory=list)

    @property
    def energies(self) -> list[float]:
        return [r.energy for r in self.records]

    @property
    def total_evals(self) -> int:
        return sum(r.evals for r in self.records)

    def mean_depth(self, weighted: bool = False) -> float:
        if not self.records:
            return 0.0
        if weighted:
            w = sum(r.evals for r in self.records)
            return sum(r.depth * r.evals for r in self.records) / w if w else 0.0
        return sum(r.depth for r in self.records) / len(self.records)

    @property
    def t_proxy(self) -> int:
        return runtime_proxy(self.records)

    def to_jsonl(self) -> str:
        header = {
            "record": "header",
            "layer_sizes": self.layer_sizes,
            "dense_depth": self.dense_depth,
            "dense_two_qubit_count": self.dense_two_qubit_count,
        }
        lines = [json.dumps(header)]
        for r in self.records:
            lines.append(json.dumps({"record": "iteration", **asdict(r)}))
        footer = {
            "record": "summary",
            "termination": self.termination,
            "best_energy": self.best_energy,
            "best_iteration": self.best_iteration,
            "best_state": self.best_state.to_json() if self.best_state is not None else None,
            "t_proxy": self.t_proxy,
            "total_evals": self.total_evals,
            "stages": self.stages,
        }
        lines.append(json.dumps(footer))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PectTrace":
        trace = None
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("record")
            if kind == "header":
                trace = cls(obj["layer_sizes"], dense_depth=obj["dense_depth"],
                            dense_two_qubit_count=obj["dense_two_qubit_count"])
            elif kind == "iteration":
                trace.records.append(IterationRecord(**obj))
            elif kind == "summary":
                trace.termination = obj["termination"]
                trace.best_energy = obj["best_energy"]
                trace.best_iteration = obj["best_iteration"]
                if obj["best_state"] is not None:
                    trace.best_state = SparseParamState.from_json(obj["best_state"])
                trace.stages = obj.get("stages", [])
        if trace is None:
            raise ValueError("trace has no header record")
        return trace


def runtime_proxy(records: Sequence[IterationRecord], shots: int = 1) -> int:
    """Sum over local optimizations of shots x depth x evaluations."""
    return int(sum(shots * r.depth * r.evals for r in records))


def runtime_proxies(trace: PectTrace, dense_trace: PectTrace | None = None) -> dict[str, int | None]:
    return {
        "t_proxy_pect": runtime_proxy(trace.records),
        "t_proxy_dense": runtime_proxy(dense_trace.records) if dense_trace is not None else None,
    }


def parameter_dynamics(trace: PectTrace) -> np.ndarray:
    """Per-iteration, per-layer mean absolute distance to the final parameters.

    Rows are iterations, columns layers; inactive slots count as 0.
    """
    if not trace.records:
        raise ValueError("trace has no iterations")
    thetas = np.array([r.theta for r in trace.records], dtype=float)
    final = thetas[-1]
    diffs = np.abs(thetas - final)
    offs = np.concatenate([[0], np.cumsum(trace.layer_sizes)]).astype(int)
    out = np.zeros((len(thetas), len(trace.layer_sizes)))
    for l, n in enumerate(trace.layer_sizes):
        if n:
            out[:, l] = diffs[:, offs[l] : offs[l + 1]].sum(axis=1) / n
    return out


# --------------------------------------------------------------------------- driver


@dataclass
class PectResult:
    best_state: SparseParamState
    best_energy: float
    trace: PectTrace

    def __iter__(self):
        return iter((self.best_state, self.trace))


def _combined(state: SparseParamState, frozen: np.ndarray | None) -> SparseParamState:
    if frozen is None or not np.any(frozen):
        return state
    theta = frozen.copy()
    active = frozen != 0
    idx = state.active_flat_indices()
    theta[idx] = state.active_values()
    active[idx] = True
    offs = np.concatenate([[0], np.cumsum(state.layer_sizes)]).astype(int)
    psi, phi = [], []
    for l in range(state.n_layers):
        sl = slice(offs[l], offs[l + 1])
        loc = np.flatnonzero(active[sl])
        psi.append(loc)
        phi.append(theta[sl][loc])
    return SparseParamState(state.layer_sizes, psi, phi)


def run_pect(
    circuit: LayeredCircuit,
    h: PauliSum,
    cfg: PectConfig,
    opt_cfg: OptimizerConfig | None = None,
    *,
    layers: Sequence[int] | None = None,
    frozen: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    init_range: tuple[float, float] | None = None,
    stage: int = 0,
) -> PectResult:
    """Run the PECT loop and return the best state ever reached with its trace.

    ``layers`` restricts training to a subset of layers and ``frozen`` gives
    fixed values for the remaining slots (layerwise training). Termination:
    best-energy stall over ``convergence_window`` iterations, the total
    evaluation budget, oscillation of the last ``oscillation_window`` energies
    without a new best, a dense subset (single optimization), or
    ``max_iterations``.
    """
    opt_cfg = opt_cfg or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    trainable = list(range(circuit.n_layers)) if layers is None else sorted(layers)
    n_trainable = sum(circuit.layer_sizes[l] for l in trainable)
    cfg.validate(n_trainable)
    if frozen is not None:
        frozen = np.asarray(frozen, dtype=float).copy()
        offs = circuit.offsets
        for l in trainable:
            frozen[offs[l] : offs[l + 1]] = 0.0

    state = init_subset(circuit.layer_sizes, cfg, rng, trainable, init_range)
    subset_size = state.n_active
    dense = subset_size == n_trainable
    trace = PectTrace(list(circuit.layer_sizes))
    dense_c = realize(circuit, SparseParamState.dense(circuit.layer_sizes, np.ones(circuit.n_params)))
    trace.dense_depth = depth(dense_c)
    trace.dense_two_qubit_count = two_qubit_gate_count(dense_c)

    counter = EvalCounter()
    threshold = cfg.h0
    best_hist: list[float] = []
    for t in range(cfg.max_iterations):
        remaining = cfg.max_total_function_evals - counter.total
        f = CircuitEnergy(circuit, h, state, counter, frozen)
        gcost = f.gradient_cost(cfg.gradient)
        if remaining < 1:
            trace.termination = "max_evals"
            break
        counter.start_block()
        local_cfg = replace(opt_cfg, max_function_evals=min(opt_cfg.max_function_evals, remaining))
        res = minimize(f, lambda x: f.gradient(x, cfg.gradient, cfg.fd_step), state.active_values(), local_cfg, gcost)
        if res.evals_used != counter.blocks[-1]:
            raise InvariantError("optimizer and counter disagree on evaluations")
        state.set_active_values(res.x)
        full = _combined(state, frozen)
        realized = realize(circuit, full)
        d = depth(realized)
        counter.set_block_depth(d)

        if res.fun < trace.best_energy:
            trace.best_energy = res.fun
            trace.best_iteration = t
            trace.best_state = full.copy()
        best_hist.append(trace.best_energy)

        reason = _termination(cfg, best_hist, [r.energy for r in trace.records] + [res.fun], counter.total, dense)
        if reason is None and t == cfg.max_iterations - 1:
            reason = "max_iterations"
        record = IterationRecord(
            iteration=t,
            stage=stage,
            start_energy=res.history[0],
            energy=res.fun,
            best_energy=trace.best_energy,
            evals=res.evals_used,
            total_evals=counter.total,
            depth=d,
            two_qubit_count=two_qubit_gate_count(realized),
            threshold=threshold,
            next_threshold=None,
            active=state.counts,
            pruned=[0] * state.n_layers,
            survived=state.counts,
            grown=[0] * state.n_layers,
            opt_termination=res.termination,
            theta=full.to_dense().tolist(),
        )
        if reason is not None:
            trace.records.append(record)
            trace.termination = reason
            break

        pruned_state, k, r, removed = prune(state, threshold)
        next_threshold = update_threshold(sum(k), threshold, cfg.n_prune, cfg.delta, cfg.threshold_factor)
        state, g = grow(pruned_state, k, r, rng, removed, trainable, cfg.avoid_regrowing_pruned)
        if sum(g) != sum(k) or state.n_active != subset_size:
            raise InvariantError("reallocation changed the subset size")
        dead = [l for l in trainable if state.counts[l] == 0 and circuit.layer_sizes[l]]
        if dead:
            log.debug("iteration %d: layers without active slots: %s", t, dead)
        record.pruned, record.survived, record.grown = k, r, g
        record.next_threshold = next_threshold
        trace.records.append(record)
        threshold = next_threshold

    if trace.best_state is None:
        raise RuntimeError("no local optimization was run")
    return PectResult(trace.best_state, trace.best_energy, trace)


def _termination(cfg: PectConfig, best_hist, energies, total_evals, dense) -> str | None:
    if dense:
        return "dense"
    if total_evals >= cfg.max_total_function_evals:
        return "max_evals"
    w = cfg.convergence_window
    if len(best_hist) > w and best_hist[-1 - w] - best_hist[-1] < cfg.convergence_tol:
        return "converged"
    w = cfg.oscillation_window
    if len(energies) > w:
        recent = energies[-w:]
        if max(recent) - min(recent) < cfg.oscillation_tol and best_hist[-1] == best_hist[-1 - w]:
            return "oscillation"
    return None


def stage_partition(n_layers: int, layers_per_stage: int) -> list[list[int]]:
    if layers_per_stage < 1:
        raise ValueError("layers_per_stage must be >= 1")
    return [list(range(i, min(i + layers_per_stage, n_layers))) for i in range(0, n_layers, layers_per_stage)]


def run_layerwise_pect(
    circuit: LayeredCircuit,
    h: PauliSum,
    cfg: PectConfig,
    opt_cfg: OptimizerConfig | None = None,
    layers_per_stage: int = 1,
    near_identity: tuple[float, float] = NEAR_IDENTITY_RANGE,
) -> PectResult:
    """Train the circuit stage by stage, freezing finished stages.

    Stage 0 uses ``cfg``'s initialization and seed (so a single stage matches
    :func:`run_pect`); later stages start in ``near_identity`` and draw from
    a generator seeded by ``(rng_seed, stage)``. Each stage has its own
    evaluation budget.
    """
    stages = stage_partition(circuit.n_layers, layers_per_stage)
    frozen = np.zeros(circuit.n_params)
    combined = PectTrace(list(circuit.layer_sizes))
    result = None
    offset = 0
    for j, stage_layers in enumerate(stages):
        rng = np.random.default_rng(cfg.rng_seed if j == 0 else [cfg.rng_seed, j])
        result = run_pect(
            circuit,
            h,
            cfg,
            opt_cfg,
            layers=stage_layers,
            frozen=frozen if j else None,
            rng=rng,
            init_range=None if j == 0 else near_identity,
            stage=j,
        )
        tr = result.trace
        if j == 0:
            combined.dense_depth = tr.dense_depth
            combined.dense_two_qubit_count = tr.dense_two_qubit_count
        for rec in tr.records:
            rec.iteration += offset
            combined.records.append(rec)
        offset += len(tr.records)
        combined.stages.append(
            {
                "stage": j,
                "layers": stage_layers,
                "start_energy": tr.records[0].start_energy,
                "final_energy": result.best_energy,
                "termination": tr.termination,
                "evals": tr.total_evals,
            }
        )
        frozen = result.best_state.to_dense()
        combined.termination = tr.termination
    combined.best_energy = result.best_energy
    combined.best_state = result.best_state
    combined.best_iteration = offset - len(result.trace.records) + result.trace.best_iteration
    return PectResult(result.best_state, result.best_energy, combined)
