"""Stage-wise chance-constrained safety test and the design searches built on it.

A new edge with moments ``(mu_e, Sigma_e)`` is declared safe when

    ||mu_e|| + sqrt(chi2_{2,1-beta} * lambda_max(Sigma_e)) <= r_c.

The mean of the stacked edge state does not depend on the variance factor
``f`` while every covariance scales with ``f^2``, so one recursion at
``f = 1`` is enough to answer every factor query for a given ``(N, dt)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drag import (DragIncrements, check_nonresonant, corrected_drift_center, drag_constant,
                   drag_increments, forcing_series, tipoff_spin_rate)
from .errors import NotPSD
from .graph import ExpansionStep, StageGraph, build_row_ladder, edge_block
from .numerics import chi2_quantile
from .orbit import DriftCenterState, InPlaneState, OrbitModel, elements_from_state
from .propagation import (ChannelMoments, ConsensusModel, InjectedMismatch, StageMoments,
                          build_lemma_operators_scalar, injected_mismatch, propagate_channels)

D = 2
F_MAX = 1.0


@dataclass(frozen=True)
class SafetyConfig:
    r_c: float
    beta: float
    d: int = D
    chi2: float = field(init=False)

    def __post_init__(self):
        if not self.r_c > 0:
            raise ValueError("r_c must be positive")
        # chi2_quantile validates beta
        object.__setattr__(self, "chi2", chi2_quantile(self.d, 1.0 - self.beta))

    def radius(self, lam_max: float) -> float:
        """Confidence-ball radius ``sqrt(chi2 * lambda_max)``."""
        return math.sqrt(self.chi2 * max(lam_max, 0.0))


@dataclass(frozen=True)
class EdgeCheck:
    index: int
    edge: tuple[int, int] | None
    mean_norm: float
    radius: float
    margin: float
    passed: bool


@dataclass(frozen=True)
class SafetyVerdict:
    stage: int
    edges: tuple[EdgeCheck, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.edges)

    @property
    def worst(self) -> EdgeCheck:
        return min(self.edges, key=lambda e: e.margin)

    @property
    def worst_edge(self):
        w = self.worst
        return w.edge if w.edge is not None else w.index


@dataclass(frozen=True)
class ReleasePolicy:
    mode: str = "fixed_velocity"
    xdot: float = 0.001
    ydot: float = 0.001
    dt_ref: float = 4.0

    def __post_init__(self):
        if self.mode not in ("fixed_velocity", "drift_matched"):
            raise ValueError(f"unknown release mode {self.mode!r}")
        if not (math.isfinite(self.xdot) and math.isfinite(self.ydot)):
            raise ValueError("release velocities must be finite")
        if self.mode == "drift_matched" and not self.dt_ref > 0:
            raise ValueError("drift_matched requires dt_ref > 0")

    def velocity_scale(self, dt: float) -> float:
        return self.dt_ref / dt if self.mode == "drift_matched" else 1.0


@dataclass(frozen=True)
class Spacecraft:
    """Cube satellite and atmosphere parameters used for drag and tip-off."""

    mass: float = 1.0
    ell: float = 0.1
    area_over_mass: float = 0.01
    d_off: float = 0.01
    rho: float = 1.18e-12
    C_d: float = 2.0
    M_trunc: int = 5
    k_air: float | None = None

    @property
    def side(self) -> float:
        """Side length ``a`` entering the drag amplitude ``a^2 / m``."""
        return math.sqrt(self.area_over_mass * self.mass)

    def k_air_for(self, model: OrbitModel) -> float:
        if self.k_air is not None:
            return self.k_air
        return drag_constant(self.rho, self.C_d, model.orbital_speed)


@dataclass(frozen=True)
class NominalRelease:
    velocity: tuple[float, float]
    base: DriftCenterState
    corrected: DriftCenterState
    nu: float
    increments: DragIncrements

    @property
    def vector(self) -> np.ndarray:
        return self.corrected.vector()


def release_policy_nominal(policy: ReleasePolicy, model: OrbitModel, dt: float,
                           craft: Spacecraft | None = None, phi: float = 0.0) -> NominalRelease:
    """Nominal drag-corrected drift center and spin rate of a released satellite."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    craft = craft or Spacecraft()
    s = policy.velocity_scale(dt)
    xd, yd = policy.xdot * s, policy.ydot * s
    el = elements_from_state(model, InPlaneState(0.0, 0.0, xd, yd))
    base = DriftCenterState.from_elements(el)
    nu = tipoff_spin_rate(math.hypot(xd, yd), craft.d_off, craft.ell)
    f = forcing_series(craft.k_air_for(model), craft.side, craft.mass, nu, phi, craft.M_trunc)
    inc = drag_increments(model, f)
    return NominalRelease(velocity=(xd, yd), base=base, corrected=corrected_drift_center(model, base, inc),
                          nu=nu, increments=inc)


def realized_centers(model: OrbitModel, nominal: NominalRelease, craft: Spacecraft, phis) -> np.ndarray:
    """Drag-corrected ``[2 C1p, C4p]`` for each tip-off phase in ``phis``."""
    phis = np.asarray(phis, dtype=float)
    f = forcing_series(craft.k_air_for(model), craft.side, craft.mass, nominal.nu, 0.0, craft.M_trunc)
    check_nonresonant(model, f)
    gain = -model.c_minus * model.Gamma
    psi = np.multiply.outer(phis, 4.0 * f.orders)
    c1 = gain * np.sum(f.Fhat * np.sin(psi) / f.nu_m, axis=-1)
    c4 = gain * np.sum(f.Fhat * np.cos(psi) / f.nu_m**2, axis=-1)
    out = np.empty(phis.shape + (D,))
    out[..., 0] = 2.0 * nominal.base.C1p + c1
    out[..., 1] = nominal.base.C4p + 0.5 * model.epsilon_2 * c4
    return out


# -- per-edge verdicts ------------------------------------------------------------------

def lam_max_2x2(S: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of each symmetric 2x2 block in ``S[..., 2, 2]``."""
    a, b, c = S[..., 0, 0], 0.5 * (S[..., 0, 1] + S[..., 1, 0]), S[..., 1, 1]
    return 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b * b)


def edge_safety(m: StageMoments, step_edges, cfg: SafetyConfig, graph: StageGraph | None = None,
                stage: int = 0) -> SafetyVerdict:
    """Chance-constraint check of every listed edge of a stage.

    ``step_edges`` are edge indices into the stacked state, or edge tuples
    when ``graph`` is given.
    """
    checks = []
    for e in step_edges:
        k = graph.edge_index(e) if graph is not None else int(e)
        mu = edge_block(m.mu, k)
        S = m.Sigma[D * k:D * k + D, D * k:D * k + D]
        lo = np.linalg.eigvalsh(0.5 * (S + S.T))
        if lo[0] < -1e-12 * max(1.0, abs(lo[-1])):
            raise NotPSD(f"edge {e} covariance has eigenvalue {lo[0]:.3e}")
        nrm = float(np.linalg.norm(mu))
        r = cfg.radius(float(lo[-1]))
        margin = cfg.r_c - (nrm + r)
        label = tuple(graph.edges[k]) if graph is not None else None
        checks.append(EdgeCheck(index=k, edge=label, mean_norm=nrm, radius=r, margin=margin, passed=margin >= 0))
    return SafetyVerdict(stage=stage, edges=tuple(checks))


# -- stage recursion at unit factor -----------------------------------------------------

@dataclass
class DeploymentProblem:
    """Everything needed to evaluate a release schedule on the row ladder."""

    model: OrbitModel
    consensus: ConsensusModel
    safety: SafetyConfig
    policy: ReleasePolicy = field(default_factory=ReleasePolicy)
    craft: Spacecraft = field(default_factory=Spacecraft)
    row_width: int = 3
    cache_bytes: int = 1 << 30
    _ladders: dict = field(default_factory=dict, repr=False)

    def ladder(self, N: int) -> list[tuple[StageGraph, ExpansionStep]]:
        # ladders are prefix-shared, so keep only the longest one
        best = max(self._ladders, default=0)
        if best < N:
            self._ladders = {N: build_row_ladder(N, self.row_width)}
            best = N
        return self._ladders[best][:N]

    def keeps_cache(self, N: int) -> bool:
        """Whether per-stage graph matrices for ``N`` rows fit in ``cache_bytes``.

        Cached Laplacians and eigenbases are reused across a dt sweep; for
        long ladders they are released stage by stage instead.
        """
        est = sum(32 * (g.m ** 2 + g.n ** 2) for g, _ in self.ladder(N))
        return est <= self.cache_bytes


@dataclass
class StageProfile:
    """Per-stage new-edge statistics at unit variance factor.

    ``mean_norm[k]`` and ``lam1[k]`` hold ``||mu_e||`` and
    ``lambda_max(Sigma_e)|_{f=1}`` for the new edges of stage ``k``;
    ``budget_A[k]`` and ``budget_B[k]`` are the stacked new-edge norms of
    ``A_{k-1} mu`` and ``B_{k-1} mu_w`` (stage 0 has no ``A`` part).
    """

    dt: float
    mean_norm: list[np.ndarray]
    lam1: list[np.ndarray]
    budget_A: np.ndarray
    budget_B: np.ndarray
    nominal: NominalRelease

    @property
    def n_stages(self) -> int:
        return len(self.mean_norm)

    def stage_factors(self, cfg: SafetyConfig, f_max: float = F_MAX) -> np.ndarray:
        """Closed-form allowable factor of each stage (0 where the mean alone fails)."""
        out = np.empty(self.n_stages)
        for k, (mn, l1) in enumerate(zip(self.mean_norm, self.lam1)):
            slack = cfg.r_c - mn
            if np.any(slack < 0):
                out[k] = 0.0
                continue
            with np.errstate(divide="ignore"):
                fk = np.where(l1 > 0, slack / np.sqrt(cfg.chi2 * np.maximum(l1, 0.0)), np.inf)
            out[k] = min(f_max, float(fk.min()))
        return out

    def passes(self, f: float, cfg: SafetyConfig, upto: int | None = None) -> bool:
        n = self.n_stages if upto is None else upto
        for mn, l1 in zip(self.mean_norm[:n], self.lam1[:n]):
            if np.any(mn + f * np.sqrt(cfg.chi2 * np.maximum(l1, 0.0)) > cfg.r_c):
                return False
        return True


def stage_inputs(problem: DeploymentProblem, N: int, dt: float):
    """Yield ``(k, graph, step, ops, mismatch)`` for stages ``0..N-1`` at unit factor.

    ``ops`` is None for stage 0, whose state is the injected mismatch itself.
    """
    nominal = release_policy_nominal(problem.policy, problem.model, dt, problem.craft)
    ladder = problem.ladder(N)
    keep = problem.keeps_cache(N)
    prev = None
    for k, (g, step) in enumerate(ladder):
        w = injected_mismatch(problem.model, step.new_edges, nominal.vector, dt, 1.0)
        ops = None if prev is None else build_lemma_operators_scalar(prev, step, problem.consensus, dt)
        yield k, g, step, ops, w, nominal
        if not keep:
            step.clear_cache()
            if prev is not None:
                prev.clear_cache()
        prev = g


def _perm(step: ExpansionStep) -> np.ndarray | None:
    perm = step.order
    return None if np.array_equal(perm, np.arange(perm.size)) else perm


def _channel_stages(problem: DeploymentProblem, N: int, dt: float, factor: float = 1.0):
    """Yield ``(k, step, moments, A_k mu new-edge part, mu_w, nominal)`` per stage."""
    mom = None
    for k, g, step, ops, w, nominal in stage_inputs(problem, N, dt):
        if factor != 1.0:
            w = InjectedMismatch(w.mu_w, factor**2 * w.Sigma_w, w.lead_time, w.trail_time)
        if ops is None:
            mom = ChannelMoments.from_stacked(StageMoments(mu=w.mu_w, Sigma=w.Sigma_w))
            a_part = np.zeros(step.n_new_edges * D)
        else:
            a_part = (ops.R_s @ (mom.mu - ops.Phi_s @ mom.mu)).reshape(-1)
            mom = propagate_channels(mom, ops, w, _perm(step))
        yield k, step, mom, a_part, w.mu_w, nominal


def stage_profile(problem: DeploymentProblem, N: int, dt: float) -> StageProfile:
    """Run the moment recursion once at ``f = 1`` and keep the new-edge statistics."""
    means, lams, bA, bB = [], [], [], []
    nominal = None
    for k, step, mom, a_part, mu_w, nominal in _channel_stages(problem, N, dt):
        pos = step.new_edge_positions
        means.append(np.linalg.norm(mom.mu[pos], axis=1))
        lams.append(lam_max_2x2(mom.edge_cov(pos)))
        bA.append(float(np.linalg.norm(a_part)))
        bB.append(float(np.linalg.norm(mu_w)))
    return StageProfile(dt=dt, mean_norm=means, lam1=lams, budget_A=np.array(bA), budget_B=np.array(bB),
                        nominal=nominal)


def stage_moments(problem: DeploymentProblem, N: int, dt: float, factor: float) -> list[StageMoments]:
    """Full stacked moments after every stage for a given variance factor."""
    return [mom.to_stacked() for _, _, mom, _, _, _ in _channel_stages(problem, N, dt, factor)]


# -- searches ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorResult:
    factor: float
    worst_stage: int
    closed_form: float
    diagnostic: str = ""
    budget_A: float = float("nan")
    budget_B: float = float("nan")


def bisect_factor(profile: StageProfile, cfg: SafetyConfig, N: int | None = None,
                  search_tol: float = 1e-4, f_max: float = F_MAX) -> float:
    """Largest factor in ``[0, f_max]`` passing every stage, by bisection."""
    if not profile.passes(0.0, cfg, N):
        return 0.0
    if profile.passes(f_max, cfg, N):
        return f_max
    lo, hi = 0.0, f_max
    while hi - lo > search_tol:
        mid = 0.5 * (lo + hi)
        if profile.passes(mid, cfg, N):
            lo = mid
        else:
            hi = mid
    return lo


def factor_from_profile(profile: StageProfile, cfg: SafetyConfig, N: int | None = None,
                        search_tol: float = 1e-4, f_max: float = F_MAX) -> FactorResult:
    n = profile.n_stages if N is None else N
    per_stage = profile.stage_factors(cfg, f_max)[:n]
    worst = int(np.argmin(per_stage))
    f = bisect_factor(profile, cfg, n, search_tol, f_max)
    diag = ""
    if f == 0.0 and not profile.passes(0.0, cfg, n):
        bad = next(k for k in range(n) if np.any(profile.mean_norm[k] > cfg.r_c))
        diag = f"NominalUnsafe: nominal mean exceeds r_c at stage {bad}"
        worst = bad
    return FactorResult(factor=f, worst_stage=worst, closed_form=float(per_stage.min()), diagnostic=diag,
                        budget_A=float(profile.budget_A[worst]), budget_B=float(profile.budget_B[worst]))


def max_allowable_factor(problem: DeploymentProblem, N: int, dt: float, search_tol: float = 1e-4,
                         f_max: float = F_MAX) -> FactorResult:
    """Largest variance factor for which every stage ``0..N-1`` passes."""
    return factor_from_profile(stage_profile(problem, N, dt), problem.safety, N, search_tol, f_max)


@dataclass(frozen=True)
class SweepRow:
    dt: float
    N: int
    factor: float
    worst_stage: int
    budget_A: float
    budget_B: float
    diagnostic: str


def sweep_interval(problem: DeploymentProblem, N, dt_grid, search_tol: float = 1e-4,
                   f_max: float = F_MAX, threads: int = 1) -> list[SweepRow]:
    """Allowable factor and mean budget at the worst stage for every ``(dt, N)``.

    ``N`` may be an int or a sequence; the recursion is run once per ``dt``
    at the largest ``N`` and prefixes serve the smaller ones.  Rows come out
    ordered by ``dt`` then ``N`` regardless of ``threads``.
    """
    Ns = sorted({int(N)} if np.isscalar(N) else {int(n) for n in N})
    grid = [float(t) for t in dt_grid]
    if any(t <= 0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("dt_grid must be ascending and positive")
    n_max = Ns[-1]
    problem.ladder(n_max)

    def one(dt: float) -> list[SweepRow]:
        prof = stage_profile(problem, n_max, dt)
        rows = []
        for n in Ns:
            r = factor_from_profile(prof, problem.safety, n, search_tol, f_max)
            rows.append(SweepRow(dt, n, r.factor, r.worst_stage, r.budget_A, r.budget_B, r.diagnostic))
        return rows

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, grid))
    else:
        parts = [one(t) for t in grid]
    return [row for part in parts for row in part]
