import numpy as np
import pytest

from conftest import reference_problem
from swarm_init.montecarlo import TrialConfig, per_trial_seed, run_trials, sample_final_states
from swarm_init.safety import stage_moments


def test_seeds_distinct_and_stateless():
    a = per_trial_seed(7, 0).generate_state(4)
    b = per_trial_seed(7, 1).generate_state(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, per_trial_seed(7, 0).generate_state(4))
    with pytest.raises(ValueError):
        per_trial_seed(7, -1)


def test_zero_factor_no_failures():
    p = reference_problem("drift_matched")
    rep = run_trials(p, TrialConfig(50, 1, 10, 4.0, 0.0, worst_q=10, sample_phase=False))
    assert rep.failures == 0
    assert np.allclose(rep.activation_max, rep.activation_max[0])


def test_deterministic_across_threads():
    p = reference_problem("drift_matched")
    cfg = TrialConfig(200, 99, 8, 4.0, 0.05, worst_q=20)
    a = run_trials(p, cfg, threads=1)
    b = run_trials(p, cfg, threads=4)
    c = run_trials(p, cfg, threads=1)
    for x in (b, c):
        assert np.array_equal(a.peak, x.peak)
        assert np.array_equal(a.worst_trace, x.worst_trace)
        assert a.worst_trials == x.worst_trials and a.failures == x.failures


def test_trace_layout():
    p = reference_problem("drift_matched")
    rep = run_trials(p, TrialConfig(100, 3, 5, 4.0, 0.05, worst_q=10))
    assert rep.time.shape == (20,) and rep.time[0] == 1.0 and rep.time[-1] == 20.0
    assert np.all(rep.worst_trace >= rep.mean_trace - 1e-15)
    assert np.all(np.isfinite(rep.worst_trace))
    assert len(rep.worst_trials) == 10
    # the trace at each activation instant is the activation distance
    assert rep.peak.max() >= rep.activation_max.max() - 1e-12


def test_large_factor_fails():
    p = reference_problem("drift_matched")
    rep = run_trials(p, TrialConfig(100, 5, 5, 4.0, 1.0, record_traces=False))
    assert rep.failures > 0 and rep.failed_trials[0] >= 0
    assert rep.worst_trace.size == 0


def test_sampled_moments_small_ladder():
    p = reference_problem("drift_matched")
    f = 0.02
    X = sample_final_states(p, TrialConfig(20000, 11, 2, 4.0, f, sample_phase=False, record_traces=False))
    an = stage_moments(p, 2, 4.0, f)[-1]
    sd = np.sqrt(np.diag(an.Sigma))
    # compare on the standard-error scale
    assert np.all(np.abs(X.mean(axis=0) - an.mu) <= 5 * sd / np.sqrt(len(X)))
    corr_err = (np.cov(X.T) - an.Sigma) / np.outer(sd, sd)
    assert np.max(np.abs(corr_err)) < 5 * np.sqrt(2 / len(X))
