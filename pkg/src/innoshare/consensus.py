"""Distributed consensus optimization with state- or innovation-sharing rounds.

run_dco and run_dico drive the same per-round arithmetic kernel; they differ
only in where each node reads its neighbors' states from (true states vs
estimates accumulated from received innovations). Because a node's estimate
of a neighbor is rebuilt by exactly the additions the neighbor itself
performs, the two algorithms produce bitwise identical trajectories.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .objectives import all_gradients, local_gradient


class DivergenceError(RuntimeError):
    """Raised when iterates blow up (step size too large for the instance)."""


TRACKERS = ("extra", "diminishing_subgradient")

_DIVERGENCE_CAP = 1e9


@dataclass
class AlgorithmConfig:
    """Step size, tracker choice and run-control knobs.

    init_states is the per-node start (n, m). stop_tol, when given together
    with a reference minimizer, stops the run once every node is within
    stop_tol * ||x*|| of x*. The diminishing tracker uses
    beta_t = subgrad_beta0 / (t+1)**subgrad_power.
    """

    step_size: float
    init_states: np.ndarray
    tracker: str = "extra"
    max_iters: int = 1000
    stop_tol: float = None
    subgrad_beta0: float = 1.0
    subgrad_power: float = 1.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tracker not in TRACKERS:
            raise ValueError(f"tracker must be one of {TRACKERS}")
        self.init_states = np.asarray(self.init_states, dtype=float)
        if self.init_states.ndim != 2:
            raise ValueError("init_states must be an (n, m) array")

    def beta(self, t):
        """Diminishing tracker schedule beta_t."""
        return self.subgrad_beta0 / (t + 1.0) ** self.subgrad_power


@dataclass(frozen=True)
class Trajectory:
    """States x_{i,t} for t = 0..T plus the transmitted innovations.

    innovations[k] holds xi_{k-1} (the message sent at round k), so row 0 is
    xi_{-1} = x_0 and x_{t+1} = x_t + innovations[t+1] holds bitwise: states
    are reconstructed from innovations by exactly the additions the
    optimizer performed.
    """

    states: np.ndarray       # (T+1, n, m)
    innovations: np.ndarray  # (T+1, n, m)
    converged_at: int = None

    @property
    def length(self):
        """Last time index T."""
        return self.states.shape[0] - 1

    @property
    def n_nodes(self):
        return self.states.shape[1]

    @property
    def dim(self):
        return self.states.shape[2]

    def node_states(self, i):
        """States of node i, shape (T+1, m)."""
        return self.states[:, i, :]

    def node_innovations(self, i):
        """Innovations of node i including xi_{-1} = x_0, shape (T+1, m)."""
        return self.innovations[:, i, :]


def _check_inputs(g, w, spec, cfg):
    wm = w.w
    if wm.shape[0] != g.n or spec.n != g.n:
        raise ValueError("graph, weights and objective disagree on node count")
    if cfg.init_states.shape != (g.n, spec.m):
        raise ValueError(f"init_states must have shape ({g.n}, {spec.m})")
    edge_mask = np.zeros_like(wm, dtype=bool)
    for i, j in g.edges():
        edge_mask[i, j] = True
    if np.any(wm[~edge_mask] != 0.0):
        raise ValueError("weights assign mass outside the graph's edges")


def _run(g, w, spec, cfg, x_star, innovation_mode):
    _check_inputs(g, w, spec, cfg)
    n, m = cfg.init_states.shape
    wm = w.w
    alpha = cfg.step_size
    extra = cfg.tracker == "extra"

    x = cfg.init_states.copy()
    states = np.empty((cfg.max_iters + 1, n, m))
    innovations = np.empty((cfg.max_iters + 1, n, m))
    states[0] = x
    innovations[0] = x  # xi_{-1} = x_0 bootstraps decoding

    grad_cur = all_gradients(spec, x)
    y = grad_cur.copy() if extra else cfg.beta(0) * grad_cur

    if innovation_mode:
        est = np.zeros((n, n, m))  # est[i, j]: node i's running estimate of node j
    xi_prev = x  # message of round 0

    x_ref_norm = None if x_star is None else np.linalg.norm(x_star)
    converged_at = None
    steps = 0
    for t in range(cfg.max_iters):
        if innovation_mode:
            est += xi_prev[None, :, :]
            view = est
        else:
            view = np.broadcast_to(x, (n, n, m))
        cons = np.einsum("ij,ijk->ik", wm, view - x[:, None, :])
        xi = cons - alpha * y
        x_new = x + xi
        if np.max(np.abs(x_new)) > _DIVERGENCE_CAP:
            raise DivergenceError(
                f"iterate magnitude exceeded {_DIVERGENCE_CAP:g} at round {t}; "
                f"step size {alpha} is too large for this instance")
        if extra:
            grad_new = all_gradients(spec, x_new)
            y = y + grad_new - grad_cur - cons / (2.0 * alpha)
            grad_cur = grad_new
        else:
            y = cfg.beta(t) * all_gradients(spec, x_new)
        steps = t + 1
        states[steps] = x_new
        innovations[steps] = xi
        x = x_new
        xi_prev = xi
        if (x_ref_norm is not None and cfg.stop_tol is not None
                and np.max(np.linalg.norm(x - x_star, axis=1)) <= cfg.stop_tol * x_ref_norm):
            converged_at = steps
            break

    return Trajectory(states=states[:steps + 1].copy(),
                      innovations=innovations[:steps + 1].copy(),
                      converged_at=converged_at)


def run_dco(g, w, spec, cfg, x_star=None):
    """State-sharing rounds: every node reads true neighbor states."""
    return _run(g, w, spec, cfg, x_star, innovation_mode=False)


def run_dico(g, w, spec, cfg, x_star=None):
    """Innovation-sharing rounds: nodes broadcast xi_{t-1} and maintain
    neighbor-state estimates by accumulating received innovations."""
    return _run(g, w, spec, cfg, x_star, innovation_mode=True)


def extra_tracker(y, grad_next, grad_cur, neighbor_states, weights, self_state, step_size):
    """One gradient-tracking update:

    y + grad_next - grad_cur - (1/(2*step_size)) * sum_j w_j (x_j - x_self).
    """
    cons = weights @ (np.asarray(neighbor_states, dtype=float) - np.asarray(self_state, dtype=float))
    return y + grad_next - grad_cur - cons / (2.0 * step_size)


def subgradient_tracker(spec, i, t, x_next, beta):
    """Diminishing-step tracker: beta(t) * grad f_i(x_next)."""
    if beta(t) <= 0:
        raise ValueError("beta schedule must stay positive")
    return beta(t) * local_gradient(spec, i, x_next)


def convergence_time(traj, x_star, rel):
    """First t with max_i ||x_{i,t} - x*|| <= rel * ||x*||, or None."""
    if rel <= 0:
        raise ValueError("rel must be positive")
    x_star = np.asarray(x_star, dtype=float)
    dists = np.linalg.norm(traj.states - x_star[None, None, :], axis=2).max(axis=1)
    hits = np.nonzero(dists <= rel * np.linalg.norm(x_star))[0]
    return int(hits[0]) if hits.size else None


def trajectory_to_csv(traj, path):
    """Write rows (t, node, component, x, xi); xi in row t is the message
    sent at round t, i.e. xi_{t-1}, so x is the running sum of xi."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "node", "component", "x", "xi"])
        T, n, m = traj.states.shape
        for t in range(T):
            for i in range(n):
                for k in range(m):
                    wr.writerow([t, i, k, repr(float(traj.states[t, i, k])),
                                 repr(float(traj.innovations[t, i, k]))])
