"""Realization-level Monte Carlo of the drift / contract / inject recursion.

Each trial draws Gaussian release errors on ``[2 C1p, C4p]`` and a uniform
tip-off phase for every satellite that enters a new edge, forms the
realized mismatch ``w`` and pushes it through the same ``Phi_k`` and anchor
maps used by the moment recursion.  Between activations the new-edge
separation is traced at a fixed time step.

Trials are split into fixed-size chunks whose partition does not depend on
the thread count, and every trial owns a counter-based generator keyed by
``(master_seed, trial)``, so reports are bit-identical for any parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numerics import make_rng
from .orbit import OrbitModel
from .propagation import build_lemma_operators_scalar, contraction_scalar, mismatch_map
from .safety import DeploymentProblem, realized_centers, release_policy_nominal

D = 2
CHUNK = 64


def per_trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    """Independent, stateless seed for one trial."""
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    return np.random.SeedSequence(int(master), spawn_key=(int(trial),))


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int
    seed: int
    N: int
    dt: float
    factor: float
    worst_q: int = 100
    trace_step: float = 1.0
    sample_phase: bool = True
    record_traces: bool = True

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.N < 1 or not self.dt > 0 or self.factor < 0:
            raise ValueError("need N >= 1, dt > 0 and factor >= 0")
        if self.worst_q < 1 or not self.trace_step > 0:
            raise ValueError("need worst_q >= 1 and trace_step > 0")


@dataclass
class TrialReport:
    n_trials: int
    failures: int
    failed_trials: list[int]
    peak: np.ndarray  # per-trial largest new-edge distance during the traces
    activation_max: np.ndarray  # per-trial largest new-edge distance at activation
    time: np.ndarray = field(default_factory=lambda: np.zeros(0))
    worst_trials: list[int] = field(default_factory=list)
    worst_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def empirical_rate(self) -> float:
        return self.failures / self.n_trials


# -- one chunk --------------------------------------------------------------------------

class _Plan:
    """Stage operators and sampling layout shared by every chunk."""

    def __init__(self, problem: DeploymentProblem, cfg: TrialConfig):
        self.problem = problem
        self.cfg = cfg
        model: OrbitModel = problem.model
        dt = cfg.dt
        self.nominal = release_policy_nominal(problem.policy, model, dt, problem.craft)
        self.sigma = cfg.factor * np.abs(self.nominal.vector)
        n_sub = max(1, int(math.floor(dt / cfg.trace_step + 1e-9)))
        subs = cfg.trace_step * np.arange(1, n_sub + 1)
        if subs[-1] < dt - 1e-9:
            subs = np.append(subs, dt)
        self.subs = subs
        self.stages = []
        prev = None
        for g, step in problem.ladder(cfg.N):
            sats, G = mismatch_map(model, step.new_edges, dt)
            G_sub = [mismatch_map(model, step.new_edges, dt, lead_time=dt + s, trail_time=s)[1] for s in subs]
            if prev is None:
                ops = None
            else:
                ops = build_lemma_operators_scalar(prev, step, problem.consensus, dt)
                # anchor map applied to (I - Phi(s)) at each trace instant
                ops = (ops, [ops.R_s @ (np.eye(prev.m) - contraction_scalar(prev, problem.consensus, s))
                             for s in subs])
            perm = step.order
            self.stages.append((sats, G, G_sub, ops, None if np.array_equal(perm, np.arange(perm.size)) else perm))
            prev = g
        self.n_sats = [len(s[0]) for s in self.stages]
        self.n_draws = sum(self.n_sats)

    def draws(self, trial: int) -> tuple[np.ndarray, np.ndarray]:
        rng = make_rng(per_trial_seed(self.cfg.seed, trial))
        z = rng.standard_normal((self.n_draws, D))
        phi = rng.uniform(0.0, 2.0 * math.pi, self.n_draws) if self.cfg.sample_phase else np.zeros(self.n_draws)
        return z, phi

    def centers(self, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Realized ``[2 C1p, C4p]`` for draws of shape ``(T, n, 2)``/``(T, n)``."""
        if self.cfg.sample_phase:
            r = realized_centers(self.problem.model, self.nominal, self.problem.craft, phi)
        else:
            r = np.broadcast_to(self.nominal.vector, z.shape)
        return r + self.sigma * z

    def run_chunk(self, trials: range, keep_states: bool = False):
        """Simulate a block of trials; columns of every state array are trials."""
        T = len(trials)
        zs, ps = zip(*(self.draws(t) for t in trials))
        r_all = self.centers(np.stack(zs), np.stack(ps))  # (T, n_draws, 2)
        act_max = np.zeros(T)
        peak = np.zeros(T)
        segs = []
        rho = None  # (m, D, T)
        off = 0
        for sats, G, G_sub, ops, perm in self.stages:
            n = len(sats)
            r = r_all[:, off:off + n, :].reshape(T, D * n).T  # (D n, T)
            off += n
            w = (G @ r).reshape(-1, D, T)
            seg = np.empty((len(G_sub), T))
            for j, Gs in enumerate(G_sub):
                x = (Gs @ r).reshape(-1, D, T)
                if ops is not None:
                    x = x + np.tensordot(ops[1][j], rho, axes=(1, 0))
                seg[j] = np.linalg.norm(x, axis=1).max(axis=0)
            if ops is None:
                new = w
                rho = w.copy()
            else:
                lem = ops[0]
                phi_rho = np.tensordot(lem.Phi_s, rho, axes=(1, 0))
                new = np.tensordot(lem.R_s, rho - phi_rho, axes=(1, 0)) + w
                rho = np.concatenate([phi_rho, new], axis=0)
                if perm is not None:
                    rho = rho[perm]
            act_max = np.maximum(act_max, np.linalg.norm(new, axis=1).max(axis=0))
            peak = np.maximum(peak, seg.max(axis=0))
            if self.cfg.record_traces:
                segs.append(seg)
        fails = act_max > self.problem.safety.r_c
        trace = np.concatenate(segs, axis=0).T if segs else None  # (T, n_times)
        return fails, act_max, peak, trace, (rho if keep_states else None)

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([k * self.cfg.dt + self.subs for k in range(len(self.stages))])


def _chunks(n: int) -> list[range]:
    return [range(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]


def _map_chunks(fn, n: int, threads: int):
    parts = _chunks(n)
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, parts))
    return [fn(c) for c in parts]


def run_trials(problem: DeploymentProblem, cfg: TrialConfig, threads: int = 1) -> TrialReport:
    """Run ``cfg.n_trials`` realizations and summarize failures and traces.

    A trial fails when any new edge exceeds ``r_c`` at its activation
    instant.  The worst ``q`` trials are those with the largest traced
    separation; ties go to the lower trial index.
    """
    plan = _Plan(problem, cfg)
    results = _map_chunks(plan.run_chunk, cfg.n_trials, threads)
    fails = np.concatenate([r[0] for r in results])
    act = np.concatenate([r[1] for r in results])
    peak = np.concatenate([r[2] for r in results])
    rep = TrialReport(n_trials=cfg.n_trials, failures=int(fails.sum()),
                      failed_trials=[int(i) for i in np.flatnonzero(fails)], peak=peak, activation_max=act)
    if cfg.record_traces:
        traces = np.concatenate([r[3] for r in results], axis=0)
        q = min(cfg.worst_q, cfg.n_trials)
        order = np.lexsort((np.arange(cfg.n_trials), -peak))[:q]
        rep.time = plan.times
        rep.worst_trials = [int(i) for i in order]
        rep.worst_trace = traces[order].max(axis=0)
        rep.mean_trace = traces[order].mean(axis=0)
    return rep


def sample_final_states(problem: DeploymentProblem, cfg: TrialConfig, threads: int = 1) -> np.ndarray:
    """Stacked edge states after the last stage, one row per trial."""
    plan = _Plan(problem, cfg)

    def fn(trials):
        rho = plan.run_chunk(trials, keep_states=True)[4]
        return rho.reshape(-1, len(trials)).T

    return np.concatenate(_map_chunks(fn, cfg.n_trials, threads), axis=0)
