"""Local optimizers: limited-memory BFGS with a strong-Wolfe line search, and gradient descent.

Both count evaluations against a hard budget: every objective call costs 1
and every gradient call costs ``grad_cost`` (the number of objective
evaluations the gradient consumes on the quantum side).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]

TERMINATIONS = ("gradient_tol", "value_tol", "max_evals", "line_search_failure", "max_iterations")


@dataclass
class OptimizerConfig:
    kind: str = "quasi_newton"
    max_function_evals: int = 100_000
    gradient_tol: float = 1e-6
    value_tol: float = 1e-9
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 25
    max_iterations: int = 10_000
    learning_rate: float = 0.1
    bounds: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("quasi_newton", "gradient_descent"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.max_function_evals < 1:
            raise ValueError("max_function_evals must be >= 1")
        if self.gradient_tol <= 0 or self.value_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line search needs 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    evals_used: int
    termination: str
    iterations: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def final_values(self) -> np.ndarray:
        return self.x

    @property
    def final_energy(self) -> float:
        return self.fun


class _Budget(Exception):
    pass


class _Evaluator:
    def __init__(self, fun: Objective, grad: Gradient, limit: int, grad_cost: int):
        self.fun, self.grad = fun, grad
        self.limit, self.grad_cost = limit, grad_cost
        self.used = 0

    def can_afford(self, with_grad: bool = True) -> bool:
        return self.used + 1 + (self.grad_cost if with_grad else 0) <= self.limit

    def f(self, x: np.ndarray) -> float:
        if self.used + 1 > self.limit:
            raise _Budget
        self.used += 1
        val = float(self.fun(x))
        if not math.isfinite(val):
            raise FloatingPointError(f"objective returned non-finite value {val!r}")
        return val

    def fg(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        if not self.can_afford():
            raise _Budget
        val = self.f(x)
        self.used += self.grad_cost
        g = np.asarray(self.grad(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("gradient contains non-finite entries")
        return val, g


def _bounds(cfg: OptimizerConfig, n: int) -> tuple[np.ndarray, np.ndarray] | None:
    if cfg.bounds is None:
        return None
    lo, hi = cfg.bounds
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if np.any(lo > hi):
        raise ValueError("lower bound above upper bound")
    return lo, hi


def _projected_grad_norm(x, g, box) -> float:
    if box is None:
        return float(np.max(np.abs(g))) if len(g) else 0.0
    return float(np.max(np.abs(np.clip(x - g, *box) - x))) if len(g) else 0.0


def minimize(
    fun: Objective,
    grad: Gradient,
    x0: Sequence[float],
    cfg: OptimizerConfig | None = None,
    grad_cost: int = 1,
) -> OptResult:
    """Minimize ``fun`` from ``x0``; returns the best accepted iterate.

    Raises:
        FloatingPointError: if the objective or gradient is not finite.
    """
    cfg = cfg or OptimizerConfig()
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    box = _bounds(cfg, len(x))
    if box is not None:
        x = np.clip(x, *box)
    ev = _Evaluator(fun, grad, cfg.max_function_evals, grad_cost)
    try:
        f, g = ev.fg(x)
    except _Budget:
        if ev.used == 0 and ev.limit >= 1:
            f = ev.f(x)
            return OptResult(x, f, ev.used, "max_evals", 0, [f])
        raise
    if cfg.kind == "quasi_newton":
        return _lbfgs(ev, x, f, g, cfg, box)
    return _gradient_descent(ev, x, f, g, cfg, box)


def _converged_value(f_old: float, f_new: float, tol: float) -> bool:
    return f_old - f_new <= tol * max(abs(f_old), abs(f_new), 1.0)


def _lbfgs(ev: _Evaluator, x, f, g, cfg: OptimizerConfig, box) -> OptResult:
    mem: deque = deque(maxlen=cfg.memory)
    history = [f]
    it = 0
    while True:
        if _projected_grad_norm(x, g, box) <= cfg.gradient_tol:
            return OptResult(x, f, ev.used, "gradient_tol", it, history)
        if it >= cfg.max_iterations:
            return OptResult(x, f, ev.used, "max_iterations", it, history)
        p = -_two_loop(g, mem)
        if g @ p >= 0:  # not a descent direction; reset memory
            mem.clear()
            p = -g
        alpha0 = 1.0 if mem else min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-12))
        try:
            if box is None:
                step = _strong_wolfe(ev, x, f, g, p, alpha0, cfg)
            else:
                step = _projected_backtracking(ev, x, f, g, p, alpha0, cfg, box)
                step = step and step[:3]
        except _Budget:
            return OptResult(x, f, ev.used, "max_evals", it, history)
        if step is None:
            return OptResult(x, f, ev.used, "line_search_failure", it, history)
        x_new, f_new, g_new = step
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            mem.append((s, y, 1.0 / sy))
        f_old = f
        x, f, g = x_new, f_new, g_new
        history.append(f)
        it += 1
        if _converged_value(f_old, f, cfg.value_tol):
            return OptResult(x, f, ev.used, "value_tol", it, history)


def _two_loop(g: np.ndarray, mem) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(mem):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if mem:
        s, y, _ = mem[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(mem, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _cubic_min(a, fa, da, b, fb, db) -> float | None:
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db)."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def _strong_wolfe(ev: _Evaluator, x, f0, g0, p, alpha, cfg: OptimizerConfig):
    """Bracketing + zoom line search; returns ``(x, f, g)`` or ``None``."""
    d0 = float(g0 @ p)
    c1, c2 = cfg.c1, cfg.c2
    best = None  # best Armijo-satisfying point, used if the search runs out of trials

    def trial(a):
        nonlocal best
        xa = x + a * p
        fa, ga = ev.fg(xa)
        if fa <= f0 + c1 * a * d0 and (best is None or fa < best[1]):
            best = (xa, fa, ga)
        return xa, fa, ga, float(ga @ p)

    def zoom(lo, flo, dlo, hi, fhi, dhi, budget):
        for _ in range(budget):
            a = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            span = abs(hi - lo)
            if a is None or not (min(lo, hi) + 0.1 * span <= a <= max(lo, hi) - 0.1 * span):
                a = 0.5 * (lo + hi)
            xa, fa, ga, da = trial(a)
            if fa > f0 + c1 * a * d0 or fa >= flo:
                hi, fhi, dhi = a, fa, da
            else:
                if abs(da) <= -c2 * d0:
                    return xa, fa, ga
                if da * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = a, fa, da
            if span < 1e-16:
                break
        return best

    a_prev, f_prev, d_prev = 0.0, f0, d0
    for i in range(cfg.max_line_search):
        xa, fa, ga, da = trial(alpha)
        if fa > f0 + c1 * alpha * d0 or (i > 0 and fa >= f_prev):
            return zoom(a_prev, f_prev, d_prev, alpha, fa, da, cfg.max_line_search - i)
        if abs(da) <= -c2 * d0:
            return xa, fa, ga
        if da >= 0:
            return zoom(alpha, fa, da, a_prev, f_prev, d_prev, cfg.max_line_search - i)
        a_prev, f_prev, d_prev = alpha, fa, da
        alpha *= 2.0
    return best


def _projected_backtracking(ev: _Evaluator, x, f0, g0, p, alpha, cfg: OptimizerConfig, box):
    for _ in range(cfg.max_line_search):
        xa = np.clip(x + alpha * p, *box)
        step = xa - x
        if not np.any(step):
            return None
        fa, ga = ev.fg(xa)
        if fa <= f0 + cfg.c1 * float(g0 @ step):
            return xa, fa, ga, alpha
        alpha *= 0.5
    return None


def _gradient_descent(ev: _Evaluator, x, f, g, cfg: OptimizerConfig, box) -> OptResult:
    history = [f]
    lr = cfg.learning_rate
    it = 0
    while True:
        if _projected_grad_norm(x, g, box) <= cfg.gradient_tol:
            return OptResult(x, f, ev.used, "gradient_tol", it, history)
        if it >= cfg.max_iterations:
            return OptResult(x, f, ev.used, "max_iterations", it, history)
        bounds = box if box is not None else (np.full(len(x), -np.inf), np.full(len(x), np.inf))
        try:
            step = _projected_backtracking(ev, x, f, g, -g, lr, cfg, bounds)
        except _Budget:
            return OptResult(x, f, ev.used, "max_evals", it, history)
        if step is None:
            return OptResult(x, f, ev.used, "line_search_failure", it, history)
        f_old = f
        x, f, g, used_lr = step
        lr = min(2.0 * used_lr, 1e3)
        history.append(f)
        it += 1
        if _converged_value(f_old, f, cfg.value_tol):
            return OptResult(x, f, ev.used, "value_tol", it, history)
