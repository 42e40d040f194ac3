"""(mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates,
cumulative step-size adaptation, and box constraints by projection plus a
quadratic penalty.

The strategy parameters follow Hansen's standard defaults. Coordinates with
``lower == upper`` are held fixed and excluded from the search distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class OptimizerError(RuntimeError):
    pass


class CMAES:
    """Ask/tell interface over an unconstrained ``dim``-dimensional space."""

    def __init__(self, mean, sigma: float, popsize: Optional[int] = None, seed: int = 0):
        self.mean = np.array(mean, dtype=float)
        if self.mean.ndim != 1 or self.mean.size == 0:
            raise OptimizerError("mean must be a non-empty vector")
        if not sigma > 0:
            raise OptimizerError("sigma must be > 0")
        N = self.dim = self.mean.size
        self.sigma = float(sigma)
        self.lam = int(popsize) if popsize else 4 + int(3 * math.log(N))
        if self.lam < 4:
            raise OptimizerError("population size must be >= 4")
        self.mu = self.lam // 2
        w = math.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)

        mueff = self.mueff
        self.cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N)
        self.cs = (mueff + 2) / (N + mueff + 5)
        self.c1 = 2 / ((N + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (N + 1)) - 1) + self.cs
        self.chiN = math.sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N * N))

        self.pc = np.zeros(N)
        self.ps = np.zeros(N)
        self.C = np.eye(N)
        self.B = np.eye(N)
        self.D = np.ones(N)
        self.invsqrtC = np.eye(N)
        self.generation = 0
        self.rng = np.random.default_rng(seed)
        self._eigen_gen = 0

    def ask(self) -> np.ndarray:
        z = self.rng.standard_normal((self.lam, self.dim))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, X, fitness) -> None:
        X = np.asarray(X, dtype=float)
        fitness = np.asarray(fitness, dtype=float)
        if X.shape != (self.lam, self.dim) or fitness.shape != (self.lam,):
            raise OptimizerError("tell() expects the full population and its fitness")
        N = self.dim
        order = np.argsort(fitness, kind="stable")
        sel = X[order[:self.mu]]
        old = self.mean
        self.mean = self.weights @ sel
        y_mean = (self.mean - old) / self.sigma

        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (self.invsqrtC @ y_mean)
        self.generation += 1
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) / self.chiN < 1.4 + 2 / (N + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y_mean

        Y = (sel - old) / self.sigma
        rank_mu = (Y.T * self.weights) @ Y
        c1a = self.c1 * (1 - (1 - hsig) * self.cc * (2 - self.cc))
        self.C = ((1 - c1a - self.cmu) * self.C + self.c1 * np.outer(self.pc, self.pc) + self.cmu * rank_mu)

        self.sigma *= math.exp(min(1.0, (self.cs / self.damps) * (ps_norm / self.chiN - 1)))
        self._update_eigen()

    def _update_eigen(self) -> None:
        # decomposition is cheap at the dimensions used here, do it every generation
        self.C = np.triu(self.C) + np.triu(self.C, 1).T
        evals, evecs = np.linalg.eigh(self.C)
        evals = np.maximum(evals, 1e-300)
        self.D = np.sqrt(evals)
        self.B = evecs
        self.invsqrtC = (evecs / self.D) @ evecs.T

    @property
    def condition(self) -> float:
        return float((self.D.max() / self.D.min()) ** 2)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    trace: list = field(default_factory=list)
    evaluations: int = 0
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    sigma: float = 0.0
    failed_evaluations: int = 0


def minimize(func: Callable[[np.ndarray], np.ndarray], x0, sigma0: float = 0.3,
             lower=None, upper=None, popsize: Optional[int] = None, max_iter: int = 1000,
             seed: int = 0, target: Optional[float] = None, tol_sigma: float = 1e-13,
             callback: Optional[Callable] = None) -> MinimizeResult:
    """Minimize a batch objective ``func(P x dim) -> (P,)`` inside a box.

    Candidates are projected onto ``[lower, upper]`` before evaluation and
    charged ``scale * ||x - proj(x)||^2`` extra, where ``scale`` is the median
    finite loss of the generation. Non-finite losses rank last. Only projected
    (feasible) points are ever reported as best.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    lower = np.full(dim, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(dim, np.inf) if upper is None else np.asarray(upper, dtype=float)
    free = upper > lower
    if not free.any():
        raise OptimizerError("all bounds are degenerate, nothing to optimize")
    x_fixed = np.clip(x0, lower, upper)
    es = CMAES(x_fixed[free], sigma0, popsize=popsize, seed=seed)

    best_x, best_f = x_fixed.copy(), math.inf
    trace = []
    evals = failed = 0
    result = MinimizeResult(best_x, best_f)
    for it in range(max_iter):
        Z = es.ask()
        X = np.tile(x_fixed, (es.lam, 1))
        X[:, free] = Z
        Xp = np.clip(X, lower, upper)
        f = np.asarray(func(Xp), dtype=float)
        evals += es.lam
        finite = np.isfinite(f)
        failed += int((~finite).sum())
        if not finite.any():
            raise OptimizerError(f"every candidate of generation {it} produced a non-finite loss")
        scale = max(float(np.median(f[finite])), 1e-300)
        dist = np.sum((X - Xp) ** 2, axis=1)
        ranked = np.where(finite, f + scale * dist, np.inf)
        # non-finite candidates rank behind all finite ones, ties keep input order
        worst = np.max(ranked[finite]) if finite.any() else 0.0
        ranked = np.where(finite, ranked, worst + 1.0 + np.abs(worst))
        i = int(np.argmin(np.where(finite, f, np.inf)))
        if f[i] < best_f:
            best_f = float(f[i])
            best_x = Xp[i].copy()
        trace.append(best_f)
        es.tell(Z, ranked)
        if callback is not None:
            callback(it, es, best_f)
        if target is not None and best_f <= target:
            result.converged, result.stop_reason = True, "target"
            break
        if es.sigma * es.D.max() < tol_sigma:
            result.converged, result.stop_reason = True, "tol_sigma"
            break
        if not np.all(np.isfinite(es.mean)) or not math.isfinite(es.sigma):
            raise OptimizerError("search distribution became non-finite")
    else:
        result.stop_reason = "max_iter"
    result.x, result.fun, result.trace = best_x, best_f, trace
    result.evaluations, result.iterations = evals, len(trace)
    result.sigma, result.failed_evaluations = es.sigma, failed
    return result
