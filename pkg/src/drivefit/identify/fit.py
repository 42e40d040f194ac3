"""Trajectory-matching loss, population evaluation, and the CMA-ES fit."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..dynamics import initial_arrays, rollout_batch
from ..model import RobotModel, SimConfig
from ..trajectory import Trajectory, TrajectoryError
from .cmaes import OptimizerError, minimize
from .params import ParamVector

Data = Union[Trajectory, Sequence[Trajectory]]


def _check_aligned(real: Trajectory, sim: Trajectory) -> None:
    if real.q.shape != sim.q.shape:
        raise TrajectoryError(f"trajectory shapes differ: {real.q.shape} vs {sim.q.shape}")


def loss(real: Trajectory, sim: Trajectory) -> float:
    """Time average of the squared position error summed over joints."""
    _check_aligned(real, sim)
    e = real.q - sim.q
    return float(np.sum(e * e) / real.n_samples)


@dataclass
class PhasePortraitMetrics:
    rms_dq: np.ndarray
    rms_dqd: np.ndarray
    mean_dq: np.ndarray

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        names = list(names) if names is not None else [f"joint{i}" for i in range(self.rms_dq.size)]
        return {
            name: {"rms_dq": float(a), "rms_dqd": float(b), "mean_dq": float(c)}
            for name, a, b, c in zip(names, self.rms_dq, self.rms_dqd, self.mean_dq)
        }


def phase_deltas(real: Trajectory, sim: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    _check_aligned(real, sim)
    return sim.q - real.q, sim.qd - real.qd


def delta_phase_metrics(real: Trajectory, sim: Trajectory) -> PhasePortraitMetrics:
    """Per-joint RMS and mean of ``sim - real`` positions, RMS of velocity deltas."""
    dq, dqd = phase_deltas(real, sim)
    return PhasePortraitMetrics(
        rms_dq=np.sqrt(np.mean(dq * dq, axis=0)),
        rms_dqd=np.sqrt(np.mean(dqd * dqd, axis=0)),
        mean_dq=np.mean(dq, axis=0),
    )


def _as_list(data: Data) -> list[Trajectory]:
    if isinstance(data, Trajectory):
        return [data]
    seqs = list(data)
    if not seqs:
        raise TrajectoryError("no data sequences given")
    return seqs


def _population_values(template: ParamVector, population) -> np.ndarray:
    if isinstance(population, ParamVector):
        return population.values[None, :]
    if len(population) and isinstance(population[0], ParamVector):
        return np.array([p.values for p in population])
    pop = np.atleast_2d(np.asarray(population, dtype=float))
    if pop.shape[1] != template.size:
        raise ValueError(f"candidates have {pop.shape[1]} entries, expected {template.size}")
    return pop


def evaluate_population(base: RobotModel, population, data: Data, sim: SimConfig = SimConfig(),
                        template: Optional[ParamVector] = None, jobs: int = 1,
                        backend: Optional[str] = None) -> tuple[np.ndarray, np.ndarray]:
    """Loss of every candidate against ``data``.

    ``population`` is a list of :class:`ParamVector` or a (P, size) array of
    raw values laid out like ``template``. Returns ``(losses, failed)``;
    candidates whose rollout diverges or that fall outside the physical domain
    get ``inf`` loss and ``failed=True``. With several sequences the loss is
    their unweighted mean. Work is split into ``jobs`` contiguous chunks run on
    threads; each candidate's loss is computed independently so the result
    does not depend on ``jobs``.
    """
    seqs = _as_list(data)
    if template is None:
        if isinstance(population, ParamVector):
            template = population
        elif len(population) and isinstance(population[0], ParamVector):
            template = population[0]
        else:
            template = ParamVector.from_model(base)
    pop = _population_values(template, population)
    P = pop.shape[0]
    if P == 0:
        raise ValueError("population is empty")
    losses = np.zeros(P)
    failed = np.zeros(P, dtype=bool)

    inertia = template.block("armature_inertia", pop)
    bad_domain = (~np.all(np.isfinite(pop), axis=1) | np.any(inertia <= 0, axis=1)
                  | (template.block("command_delay", pop) < 0))
    for name in ("viscous_damping", "coulomb_friction"):
        bad_domain |= np.any(template.block(name, pop) < 0, axis=1)
    ok = np.flatnonzero(~bad_domain)
    failed[bad_domain] = True
    losses[bad_domain] = np.inf
    if ok.size == 0:
        return losses, failed

    chunks = [c for c in np.array_split(ok, max(1, min(jobs, ok.size))) if c.size]

    def run(idx):
        batch = template.batch(base, pop[idx])
        total = np.zeros(idx.size)
        div = np.zeros(idx.size, dtype=bool)
        for seq in seqs:
            q0, qd0 = initial_arrays(base, seq)
            _, _, _, l, d = rollout_batch(base, batch, seq, sim, q0, qd0, q_ref=seq.q,
                                          keep_trajectory=False, backend=backend)
            total += l
            div |= d
        return idx, total / len(seqs), div

    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run, chunks))
    for idx, l, d in results:
        losses[idx] = np.where(d, np.inf, l)
        failed[idx] = d | ~np.isfinite(l)
    return losses, failed


@dataclass
class FitConfig:
    population_size: int = 32
    max_iterations: int = 800
    initial_sigma: float = 0.3
    seed: int = 0
    target_loss: Optional[float] = None
    tol_sigma: float = 1e-12

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0 < self.initial_sigma <= 1:
            raise ValueError("initial_sigma must be in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class FitResult:
    best_params: ParamVector
    best_loss: float
    score_trace: list
    evaluations: int
    converged: bool
    iterations: int = 0
    stop_reason: str = ""
    failed_evaluations: int = 0
    final_sigma: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self, model: Optional[RobotModel] = None) -> dict:
        return {
            "params": self.best_params.to_dict(model),
            "best_loss": self.best_loss,
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "failed_evaluations": self.failed_evaluations,
            "final_sigma": self.final_sigma,
        }


def cma_es_fit(base: RobotModel, data: Data, bounds: ParamVector, cfg: FitConfig = FitConfig(),
               sim: SimConfig = SimConfig(), jobs: int = 1, backend: Optional[str] = None,
               callback=None) -> FitResult:
    """Fit ``bounds``' entries of ``base`` to ``data`` with CMA-ES.

    Search runs in bound-normalized coordinates starting at the box center
    with step ``cfg.initial_sigma``. ``bounds.values`` is not used as a start
    point; entries with equal lower and upper bounds are held fixed.
    """
    seqs = _as_list(data)
    for seq in seqs:
        # a sample covers one period, so K samples span K * dt
        if seq.n_samples * seq.check_uniform() < 2.0 - 1e-9:
            raise TrajectoryError("each data sequence must cover at least 2 s")
    if not (np.all(np.isfinite(bounds.lower)) and np.all(np.isfinite(bounds.upper))):
        raise ValueError("bounds must be finite")
    free = bounds.free
    if not free.any():
        raise OptimizerError("all bounds are degenerate, nothing to optimize")
    dim = bounds.size

    def objective(X):
        raw = bounds.denormalize(X)
        l, _ = evaluate_population(base, raw, seqs, sim, template=bounds, jobs=jobs, backend=backend)
        return l

    x0 = np.where(free, 0.5, 0.0)
    res = minimize(objective, x0, cfg.initial_sigma, lower=np.zeros(dim), upper=np.where(free, 1.0, 0.0),
                   popsize=cfg.population_size, max_iter=cfg.max_iterations, seed=cfg.seed,
                   target=cfg.target_loss, tol_sigma=cfg.tol_sigma, callback=callback)
    best = bounds.with_values(bounds.denormalize(res.x))
    if not math.isfinite(res.fun):
        raise OptimizerError("no candidate produced a finite loss")
    return FitResult(
        best_params=best,
        best_loss=res.fun,
        score_trace=res.trace,
        evaluations=res.evaluations,
        converged=res.converged,
        iterations=res.iterations,
        stop_reason=res.stop_reason,
        failed_evaluations=res.failed_evaluations,
        final_sigma=res.sigma,
    )
