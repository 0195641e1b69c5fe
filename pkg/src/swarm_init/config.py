"""JSON experiment configuration: schema, defaults and validation.

Every science parameter lives in the config document.  Validation is
explicit so that each error names the dotted key at fault, e.g.
``orbit.m`` or ``deployment.dt_grid``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .orbit import J2_EARTH, OrbitModel, derive_coefficients, k_j2_from_j2
from .propagation import ConsensusModel
from .safety import DeploymentProblem, ReleasePolicy, SafetyConfig, Spacecraft

REQUIRED_BLOCKS = ("orbit", "consensus", "safety", "deployment")

DEFAULTS = {
    "orbit": {"J2": J2_EARTH, "k_J2": None},
    "drag": {"M_trunc": 5, "k_air": None},
    "deployment": {"policy": "fixed_velocity", "xdot": 0.001, "ydot": 0.001, "dt_ref": 4.0,
                   "search_tol": 1e-4, "f_max": 1.0},
    "mc": {"n_trials": 1000, "seed": 20240601, "worst_q": 100, "variance_factor": 0.025,
           "trace_step": 1.0, "sample_phase": True},
}

POSITIVE_ORBIT = ("mu", "R_e", "h", "rho", "C_d", "A_over_m", "m", "ell", "d_off")


def _num(block: dict, name: str, key: str, positive: bool = False, allow_zero: bool = False) -> float:
    if name not in block:
        raise ConfigError(key, "missing")
    v = block[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(key, f"expected a finite number, got {v!r}")
    if positive and not (v > 0 or (allow_zero and v == 0)):
        raise ConfigError(key, f"must be {'non-negative' if allow_zero else 'positive'}, got {v!r}")
    return float(v)


def _int(block: dict, name: str, key: str, minimum: int = 1) -> int:
    v = block.get(name)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(key, f"expected an integer >= {minimum}, got {v!r}")
    return v


def _grid(block: dict, key: str) -> list[float]:
    if "dt_grid" in block:
        g = block["dt_grid"]
        if not isinstance(g, list) or not g:
            raise ConfigError(f"{key}.dt_grid", "must be a non-empty list")
        out = []
        for i, v in enumerate(g):
            out.append(_num({"v": v}, "v", f"{key}.dt_grid[{i}]", positive=True))
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError(f"{key}.dt_grid", "must be strictly ascending")
        return out
    if "dt" in block:
        return [_num(block, "dt", f"{key}.dt", positive=True)]
    raise ConfigError(f"{key}.dt_grid", "missing (give dt_grid or dt)")


@dataclass
class ExperimentConfig:
    raw: dict
    model: OrbitModel
    consensus: ConsensusModel
    safety: SafetyConfig
    policy: ReleasePolicy
    craft: Spacecraft
    N: list[int]
    dt_grid: list[float]
    search_tol: float
    f_max: float
    mc: dict

    def problem(self) -> DeploymentProblem:
        return DeploymentProblem(self.model, self.consensus, self.safety, self.policy, self.craft)

    def resolved_json(self) -> str:
        """Canonical JSON echo of the fully resolved config."""
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def resolve(doc) -> dict:
    """Merge defaults into a raw document (no validation)."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    out = copy.deepcopy(doc)
    for block, vals in DEFAULTS.items():
        cur = out.setdefault(block, {}) if block not in REQUIRED_BLOCKS else out.get(block)
        if cur is None:
            continue
        if not isinstance(cur, dict):
            raise ConfigError(block, "must be a JSON object")
        for k, v in vals.items():
            cur.setdefault(k, v)
    return out


def parse_config(doc) -> ExperimentConfig:
    raw = resolve(doc)
    for block in REQUIRED_BLOCKS:
        if block not in raw:
            raise ConfigError(block, "missing block")
        if not isinstance(raw[block], dict):
            raise ConfigError(block, "must be a JSON object")

    o = raw["orbit"]
    vals = {k: _num(o, k, f"orbit.{k}", positive=True) for k in POSITIVE_ORBIT}
    i0 = _num(o, "i0", "orbit.i0")
    if not 0.0 <= i0 <= 180.0:
        raise ConfigError("orbit.i0", f"inclination in degrees must lie in [0, 180], got {i0}")
    if o.get("k_J2") is not None:
        kj2 = _num(o, "k_J2", "orbit.k_J2")
    else:
        kj2 = k_j2_from_j2(_num(o, "J2", "orbit.J2"), vals["mu"], vals["R_e"])
    try:
        model = derive_coefficients(vals["mu"], vals["R_e"] + vals["h"], math.radians(i0), kj2)
    except ValueError as exc:
        raise ConfigError("orbit", str(exc)) from None

    c = raw["consensus"]
    consensus = ConsensusModel(_num(c, "k_A", "consensus.k_A", positive=True, allow_zero=True), model.k_0)

    s = raw["safety"]
    r_c = _num(s, "r_c", "safety.r_c", positive=True)
    beta = _num(s, "beta", "safety.beta")
    if not 0.0 < beta < 1.0:
        raise ConfigError("safety.beta", f"must lie in (0, 1), got {beta}")
    safety = SafetyConfig(r_c, beta)

    d = raw["deployment"]
    Nv = d.get("N")
    Ns = Nv if isinstance(Nv, list) else [Nv]
    if not Ns:
        raise ConfigError("deployment.N", "must be a positive integer or a non-empty list")
    Ns = [_int({"N": n}, "N", "deployment.N") for n in Ns]
    grid = _grid(d, "deployment")
    mode = d.get("policy")
    if mode not in ("fixed_velocity", "drift_matched"):
        raise ConfigError("deployment.policy", f"expected 'fixed_velocity' or 'drift_matched', got {mode!r}")
    policy = ReleasePolicy(mode, _num(d, "xdot", "deployment.xdot"), _num(d, "ydot", "deployment.ydot"),
                           _num(d, "dt_ref", "deployment.dt_ref", positive=True))
    if policy.xdot == 0 and policy.ydot == 0:
        raise ConfigError("deployment.xdot", "release velocity must be nonzero")
    search_tol = _num(d, "search_tol", "deployment.search_tol", positive=True)
    f_max = _num(d, "f_max", "deployment.f_max", positive=True)

    dr = raw["drag"]
    k_air = None if dr.get("k_air") is None else _num(dr, "k_air", "drag.k_air", positive=True, allow_zero=True)
    craft = Spacecraft(mass=vals["m"], ell=vals["ell"], area_over_mass=vals["A_over_m"], d_off=vals["d_off"],
                       rho=vals["rho"], C_d=vals["C_d"], M_trunc=_int(dr, "M_trunc", "drag.M_trunc"),
                       k_air=k_air)

    m = raw["mc"]
    mc = {
        "n_trials": _int(m, "n_trials", "mc.n_trials"),
        "seed": _int(m, "seed", "mc.seed", minimum=0),
        "worst_q": _int(m, "worst_q", "mc.worst_q"),
        "variance_factor": _num(m, "variance_factor", "mc.variance_factor", positive=True, allow_zero=True),
        "trace_step": _num(m, "trace_step", "mc.trace_step", positive=True),
        "sample_phase": m.get("sample_phase"),
    }
    if not isinstance(mc["sample_phase"], bool):
        raise ConfigError("mc.sample_phase", "expected true or false")

    return ExperimentConfig(raw=raw, model=model, consensus=consensus, safety=safety, policy=policy,
                            craft=craft, N=Ns, dt_grid=grid, search_tol=search_tol, f_max=f_max, mc=mc)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {p}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return parse_config(doc)
