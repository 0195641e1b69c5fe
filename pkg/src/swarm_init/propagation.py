"""Stage-to-stage propagation of the stacked edge state.

Across an expansion ``G_k -> G_{k+1}`` the edge state obeys the affine map

    rho_{k+1} = A_k rho_k + B_k w_{k+1},
    A_k = P [Phi_k ; R (I - Phi_k)],   B_k = P [0 ; I],

with ``Phi_k`` the consensus contraction over one interval, ``R`` the
anchor-displacement map and ``w`` the drift-center mismatch injected into
the new edges.  With the closed-loop matrix ``A = a I_2`` every operator is
a Kronecker product ``(scalar edge operator) (x) I_2``; the ``*_scalar``
helpers return the edge-level factor and the public functions the full
matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNominal, DimensionMismatch
from .graph import ExpansionStep, StageGraph, anchor_projection_scalar
from .numerics import sym_expm
from .orbit import OrbitModel, free_drift_transition

D = 2


@dataclass(frozen=True)
class ConsensusModel:
    k_A: float
    k_0: float

    @property
    def rate(self) -> float:
        """Scalar ``a`` of the closed-loop matrix ``A = a I_2``."""
        return self.k_A / self.k_0

    @property
    def A(self) -> np.ndarray:
        return self.rate * np.eye(D)


@dataclass(frozen=True)
class StageMoments:
    mu: np.ndarray
    Sigma: np.ndarray

    @property
    def dim(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class InjectedMismatch:
    mu_w: np.ndarray
    Sigma_w: np.ndarray
    lead_time: float
    trail_time: float


@dataclass(frozen=True)
class LemmaOperators:
    """Edge-level factors of ``A_k`` and ``B_k``."""

    A_s: np.ndarray
    B_s: np.ndarray
    Phi_s: np.ndarray
    R_s: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.kron(self.A_s, np.eye(D))

    @property
    def B(self) -> np.ndarray:
        return np.kron(self.B_s, np.eye(D))


def contraction_scalar(graph: StageGraph, consensus: ConsensusModel, dt: float) -> np.ndarray:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0 or consensus.rate == 0:
        return np.eye(graph.m)
    return sym_expm(graph.edge_laplacian, -dt * consensus.rate, eig=graph.edge_eigen)


def contraction(graph: StageGraph, consensus: ConsensusModel, dt: float) -> np.ndarray:
    """``Phi = exp(-dt (L_e (x) A)) = exp(-dt a L_e) (x) I_2``."""
    return np.kron(contraction_scalar(graph, consensus, dt), np.eye(D))


def build_lemma_operators_scalar(graph_k: StageGraph, step: ExpansionStep,
                                 consensus: ConsensusModel, dt: float) -> LemmaOperators:
    graph_k.require_connected()
    phi = contraction_scalar(graph_k, consensus, dt)
    R = anchor_projection_scalar(step, graph_k)
    m, f = graph_k.m, step.n_new_edges
    top = np.vstack([phi, R @ (np.eye(m) - phi)])
    bottom = np.vstack([np.zeros((m, f)), np.eye(f)])
    order = step.order
    return LemmaOperators(A_s=top[order], B_s=bottom[order], Phi_s=phi, R_s=R)


def build_lemma_operators(graph_k: StageGraph, step: ExpansionStep,
                          consensus: ConsensusModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    ops = build_lemma_operators_scalar(graph_k, step, consensus, dt)
    return ops.A, ops.B


# -- injected mismatch ----------------------------------------------------------------

def mismatch_map(model: OrbitModel, new_edges, dt: float, lead_time: float | None = None,
                 trail_time: float | None = None) -> tuple[list[int], np.ndarray]:
    """Linear map from satellite drift centers to the stacked new-edge mismatch.

    Returns ``(satellites, G)`` with ``w = G @ concat(r_s for s in satellites)``
    where each ``r_s`` is the ``[2 C1p, C4p]`` vector of satellite ``s``.  The
    lower-numbered endpoint of every edge is the leading satellite and drifts
    for ``lead_time`` (default ``2 dt``); the other drifts ``trail_time``
    (default ``dt``).
    """
    lead = 2.0 * dt if lead_time is None else lead_time
    trail = dt if trail_time is None else trail_time
    psi_lead = free_drift_transition(model, lead)
    psi_trail = free_drift_transition(model, trail)
    sats = sorted({n for e in new_edges for n in e})
    col = {s: c for c, s in enumerate(sats)}
    G = np.zeros((D * len(new_edges), D * len(sats)))
    for f, (i, j) in enumerate(new_edges):
        sign = 1.0 if i < j else -1.0
        lo, hi = min(i, j), max(i, j)
        rows = slice(D * f, D * f + D)
        G[rows, D * col[lo]:D * col[lo] + D] += sign * psi_lead
        G[rows, D * col[hi]:D * col[hi] + D] -= sign * psi_trail
    return sats, G


def release_covariance(nominal: np.ndarray, variance_factor: float) -> np.ndarray:
    """Per-satellite covariance ``diag((f*2C1p)^2, (f*C4p)^2)`` for nominal ``[2C1p, C4p]``."""
    nominal = np.asarray(nominal, dtype=float)
    if variance_factor > 0 and np.any(nominal == 0.0):
        raise DegenerateNominal(f"zero nominal component in {nominal.tolist()}")
    return np.diag((variance_factor * nominal) ** 2)


def injected_mismatch(model: OrbitModel, new_edges, nominal, dt: float, variance_factor: float,
                      lead_time: float | None = None, trail_time: float | None = None) -> InjectedMismatch:
    """Moments of the mismatch injected into the new edges of one stage.

    ``nominal`` maps each satellite to its drag-corrected nominal vector
    ``[2 C1p, C4p]`` (a mapping, a sequence indexed by node, or a single
    vector shared by all satellites).  Release errors are independent across
    satellites; new edges that share a satellite are correlated through it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if variance_factor < 0:
        raise ValueError("variance_factor must be non-negative")
    sats, G = mismatch_map(model, new_edges, dt, lead_time, trail_time)
    vecs = [np.asarray(_nominal_of(nominal, s), dtype=float) for s in sats]
    r = np.concatenate(vecs)
    cov = np.zeros((r.size, r.size))
    for c, v in enumerate(vecs):
        cov[D * c:D * c + D, D * c:D * c + D] = release_covariance(v, variance_factor)
    S = G @ cov @ G.T
    lead = 2.0 * dt if lead_time is None else lead_time
    trail = dt if trail_time is None else trail_time
    return InjectedMismatch(mu_w=G @ r, Sigma_w=0.5 * (S + S.T), lead_time=lead, trail_time=trail)


def _nominal_of(nominal, s: int):
    if isinstance(nominal, dict):
        return nominal[s]
    arr = np.asarray(nominal, dtype=float)
    if arr.ndim == 1:
        return arr
    return arr[s]


# -- moment recursion -----------------------------------------------------------------

def _symmetrize(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.T)


def propagate_moments(m: StageMoments, A_k: np.ndarray, B_k: np.ndarray, w: InjectedMismatch) -> StageMoments:
    if A_k.shape[1] != m.mu.size or m.Sigma.shape != (m.mu.size, m.mu.size):
        raise DimensionMismatch(f"A_k {A_k.shape} vs state {m.mu.size}")
    if B_k.shape[0] != A_k.shape[0] or B_k.shape[1] != w.mu_w.size:
        raise DimensionMismatch(f"B_k {B_k.shape} vs A_k {A_k.shape} / mismatch {w.mu_w.size}")
    mu = A_k @ m.mu + B_k @ w.mu_w
    Sigma = A_k @ m.Sigma @ A_k.T + B_k @ w.Sigma_w @ B_k.T
    return StageMoments(mu=mu, Sigma=_symmetrize(Sigma))


def kron_apply(Ms: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``(Ms (x) I_2) v`` for a vector, or for each column of a 2-D array."""
    if v.ndim == 1:
        return (Ms @ v.reshape(-1, D)).reshape(-1)
    cols = v.shape[1]
    return np.tensordot(Ms, v.reshape(-1, D, cols), axes=(1, 0)).reshape(-1, cols)


def kron_congruence(Ms: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``(Ms (x) I_2) S (Ms (x) I_2)^T`` without forming the Kronecker product."""
    m = Ms.shape[1]
    T = (Ms @ S.reshape(m, -1)).reshape(-1, D, m, D)
    out = np.tensordot(T, Ms, axes=(2, 1))  # (m', D, D, m')
    n = Ms.shape[0]
    return out.transpose(0, 1, 3, 2).reshape(D * n, D * n)


def propagate_moments_scalar(m: StageMoments, ops: LemmaOperators, w: InjectedMismatch) -> StageMoments:
    """Same as :func:`propagate_moments` but exploits the Kronecker structure."""
    mu = kron_apply(ops.A_s, m.mu) + kron_apply(ops.B_s, w.mu_w)
    Sigma = kron_congruence(ops.A_s, m.Sigma) + kron_congruence(ops.B_s, w.Sigma_w)
    return StageMoments(mu=mu, Sigma=_symmetrize(Sigma))


def closed_form_stack(operators, initial: StageMoments, mismatches) -> StageMoments:
    """Moments at stage ``M`` from the explicit sum over ``Gamma_{M,i}``.

    ``operators`` is ``[(A_0, B_0), ..., (A_{M-1}, B_{M-1})]`` and
    ``mismatches`` is ``[w^(1), ..., w^(M)]``.
    """
    ops = list(operators)
    ws = list(mismatches)
    M = len(ops)
    if len(ws) != M:
        raise DimensionMismatch(f"{M} operator pairs but {len(ws)} mismatches")
    for j in range(M):
        A, B = ops[j]
        expect_in = initial.mu.size if j == 0 else ops[j - 1][0].shape[0]
        if A.shape[1] != expect_in or B.shape[0] != A.shape[0] or B.shape[1] != ws[j].mu_w.size:
            raise DimensionMismatch(f"stage {j}: inconsistent operator shapes")
    # suffix[i] = A_{M-1} ... A_i, suffix[M] = I
    suffix = [None] * (M + 1)
    suffix[M] = np.eye(ops[-1][0].shape[0]) if M else np.eye(initial.mu.size)
    for i in range(M - 1, -1, -1):
        suffix[i] = suffix[i + 1] @ ops[i][0]
    T = suffix[0]
    mu = T @ initial.mu
    Sigma = T @ initial.Sigma @ T.T
    for i in range(1, M + 1):
        Gam = suffix[i] @ ops[i - 1][1]
        mu = mu + Gam @ ws[i - 1].mu_w
        Sigma = Sigma + Gam @ ws[i - 1].Sigma_w @ Gam.T
    return StageMoments(mu=mu, Sigma=_symmetrize(Sigma))


# -- channel-blocked recursion ----------------------------------------------------------

@dataclass
class ChannelMoments:
    """Stage moments stored per coordinate channel.

    ``mu[e, a]`` is channel ``a`` of edge ``e`` and ``S[a][b]`` the ``m x m``
    covariance between channels ``a`` and ``b``.  Because every operator acts
    as ``(edge operator) (x) I_2`` the channels are updated independently,
    which avoids Kronecker-sized products.
    """

    mu: np.ndarray
    S: list

    @classmethod
    def from_stacked(cls, m: StageMoments) -> "ChannelMoments":
        mu = m.mu.reshape(-1, D)
        S = [[m.Sigma[a::D, b::D].copy() for b in range(D)] for a in range(D)]
        return cls(mu=mu.copy(), S=S)

    def to_stacked(self) -> StageMoments:
        n = self.mu.shape[0]
        Sigma = np.empty((D * n, D * n))
        for a in range(D):
            for b in range(D):
                Sigma[a::D, b::D] = self.S[a][b]
        return StageMoments(mu=self.mu.reshape(-1).copy(), Sigma=Sigma)

    def edge_cov(self, positions) -> np.ndarray:
        """``(len(positions), 2, 2)`` covariance blocks of the listed edges."""
        p = np.asarray(positions, dtype=int)
        out = np.empty((p.size, D, D))
        for a in range(D):
            for b in range(D):
                out[:, a, b] = self.S[a][b][p, p]
        return out


def propagate_channels(m: ChannelMoments, ops: LemmaOperators, w: InjectedMismatch,
                       perm: np.ndarray | None = None) -> ChannelMoments:
    """One stage update on :class:`ChannelMoments`.

    Uses ``A_k = P [Phi; R (I - Phi)]`` directly so that each channel block
    costs two ``m^3`` products.  ``perm`` maps the stacked ``[old; new]``
    ordering to the graph ordering (identity when omitted).
    """
    phi, R = ops.Phi_s, ops.R_s
    mu_w = w.mu_w.reshape(-1, D)
    if mu_w.shape[0] != R.shape[0] or phi.shape[0] != m.mu.shape[0]:
        raise DimensionMismatch("operator and moment shapes disagree")
    pm = phi @ m.mu
    mu = np.vstack([pm, R @ (m.mu - pm) + mu_w])
    S = [[None] * D for _ in range(D)]
    for a in range(D):
        for b in range(a, D):
            Sab = m.S[a][b]
            T = Sab @ phi
            top = phi @ T
            rest_r = (Sab - T) @ R.T  # S (I - Phi) R^T
            upper = phi @ rest_r
            lower = R @ (T - top)  # R (I - Phi) S Phi
            corner = R @ (rest_r - upper)
            corner += w.Sigma_w[a::D, b::D]
            blk = np.block([[top, upper], [lower, corner]])
            if a == b:
                blk = 0.5 * (blk + blk.T)
            S[a][b] = blk
            if a != b:
                S[b][a] = blk.T
    out = ChannelMoments(mu=mu, S=S)
    if perm is not None:
        out = ChannelMoments(mu=out.mu[perm], S=[[s[np.ix_(perm, perm)] for s in row] for row in out.S])
    return out
