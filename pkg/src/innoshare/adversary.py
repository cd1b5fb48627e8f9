"""Probabilistic eavesdropper against one node: interception, estimation, error.

The adversary intercepts the target's outgoing message with probability
intercept_prob each round, independently of everything else. Its message
estimate follows

    z_t = (1 - mu_t) * b_t * z_{t-1} + mu_t * m_t,   b_0 = 1, b_t = miss_weight,

from a deterministic start z_{-1}; the state estimate is the running sum of
z (innovation-sharing wire) or z itself (state-sharing wire).
"""

from dataclasses import dataclass, field

import numpy as np

from .streams import bernoulli_stream

MODES = ("innovation_sharing", "state_sharing")


@dataclass(frozen=True)
class AdversaryConfig:
    """Eavesdropper parameters.

    intercept_prob: per-round interception success probability, in (0, 1).
    miss_weight: decay applied to the last estimate when interception fails
    (from round 1 on; round 0 always carries z_{-1} with weight 1).
    estimate_init: deterministic z_{-1} (scalar broadcast or m-vector).
    """

    intercept_prob: float
    miss_weight: float
    estimate_init: np.ndarray = 0.0
    mode: str = "innovation_sharing"
    target: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.intercept_prob < 1.0:
            raise ValueError("intercept_prob must lie strictly between 0 and 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        object.__setattr__(self, "estimate_init",
                           np.atleast_1d(np.asarray(self.estimate_init, dtype=float)))


@dataclass(frozen=True)
class AdversaryRun:
    """One sampled interception realization against a trajectory."""

    mu: np.ndarray      # (T+1,) booleans, interception successes
    z: np.ndarray       # (T+1, m) message estimates
    x_hat: np.ndarray   # (T+1, m) reconstructed state estimates
    e: np.ndarray       # (T+1, m) errors x_hat_t - x_t
    config: AdversaryConfig
    run_index: int


def target_messages(traj, cfg):
    """The wire content the adversary sees: xi_{t-1} or x_t, shape (T+1, m)."""
    if cfg.mode == "innovation_sharing":
        return traj.node_innovations(cfg.target)
    return traj.node_states(cfg.target)


def sample_run(traj, cfg, run_index, mu=None):
    """Simulate one interception realization.

    mu overrides the Bernoulli stream (a (T+1,) boolean array); by default
    draws come from the counter-based stream keyed by (cfg.seed, run_index),
    so the realization is independent of how the trajectory was produced.
    """
    if not 0 <= cfg.target < traj.n_nodes:
        raise ValueError("target node out of range")
    msgs = target_messages(traj, cfg)
    steps = msgs.shape[0]
    m = msgs.shape[1]
    if mu is None:
        mu = bernoulli_stream(cfg.seed, run_index, steps, cfg.intercept_prob)
    else:
        mu = np.asarray(mu, dtype=bool)
        if mu.shape != (steps,):
            raise ValueError(f"mu override must have shape ({steps},)")

    z_prev = np.broadcast_to(cfg.estimate_init, (m,)).astype(float)
    z = np.empty((steps, m))
    x_hat = np.empty((steps, m))
    acc = np.zeros(m)
    for t in range(steps):
        b_t = 1.0 if t == 0 else cfg.miss_weight
        z_t = msgs[t] if mu[t] else b_t * z_prev
        z[t] = z_t
        if cfg.mode == "innovation_sharing":
            acc = acc + z_t
            x_hat[t] = acc
        else:
            x_hat[t] = z_t
        z_prev = z_t

    e = x_hat - traj.node_states(cfg.target)
    return AdversaryRun(mu=mu, z=z, x_hat=x_hat, e=e, config=cfg, run_index=run_index)


def tail_weight_moments(intercept_prob, miss_weight, rtol=1e-16, max_terms=5_000_000):
    """First and second moments of G = sum_{k=1}^{N-1} miss_weight**k where N
    is the number of rounds until the next interception (geometric).

    Once the trajectory is frozen the estimate evolves as z_{H+k} =
    miss_weight**k * z_H until the first interception zeroes it, so the
    post-horizon error increment is G * z_H. Computed by direct series
    summation, which stays accurate near miss_weight = 1 where the closed
    form cancels catastrophically. Requires (1-gamma) * b^2 < 1.
    """
    gamma = intercept_prob
    b = miss_weight
    gbar = 1.0 - gamma
    if gbar * b * b >= 1.0:
        raise ValueError("tail moments undefined: (1-intercept_prob) * miss_weight^2 >= 1")
    eg = eg2 = 0.0
    g = 0.0       # sum_{k=1}^{n-1} b^k at n
    bn = b        # b^n
    weight = gamma  # P(N = n)
    for _ in range(max_terms):
        eg += weight * g
        eg2 += weight * g * g
        g += bn
        bn *= b
        weight *= gbar
        if weight * (1.0 + abs(g) + g * g) < rtol * (1.0 + abs(eg) + eg2):
            return eg, eg2
    raise RuntimeError("tail moment series did not converge (parameters too "
                       "close to the (1-gamma) b^2 = 1 boundary)")


def terminal_error(run, x_star=None, tail=False):
    """Squared estimation error at the last recorded step.

    With x_star the error is measured against that reference limit instead
    of the recorded final state. With tail=True (innovation mode only) the
    closed-form post-horizon expectation is added, i.e. the conditional
    E||e_inf||^2 given the run's terminal (e, z).
    """
    cfg = run.config
    e = run.x_hat[-1] - np.asarray(x_star, dtype=float) if x_star is not None else run.e[-1]
    base = float((e * e).sum())
    if not tail:
        return base
    if cfg.mode != "innovation_sharing":
        raise ValueError("tail correction applies to innovation-sharing runs only")
    eg, eg2 = tail_weight_moments(cfg.intercept_prob, cfg.miss_weight)
    z_last = run.z[-1]
    return base + 2.0 * eg * float((e * z_last).sum()) + eg2 * float((z_last * z_last).sum())


def run_to_csv(run, path):
    """Debug dump: one row per step with mu and the z / e components."""
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        m = run.z.shape[1]
        wr.writerow(["t", "mu"] + [f"z{k}" for k in range(m)] + [f"e{k}" for k in range(m)])
        for t in range(run.z.shape[0]):
            wr.writerow([t, int(run.mu[t])]
                        + [repr(float(v)) for v in run.z[t]]
                        + [repr(float(v)) for v in run.e[t]])
