"""Exact and bounded protection levels for innovation-sharing trajectories.

All closed forms consume the innovation sequence with its bootstrap row
(first row xi_{-1} = x_0) and quantify the adversary's limiting expected
squared estimation error E||e_inf||^2. A vectorized Monte Carlo estimator
with an analytic post-horizon closure validates every formula.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .adversary import target_messages, tail_weight_moments
from .streams import bernoulli_stream

_QUIET_SQ = 1e-14     # step counts as quiescent below this (relative to Q)
_QUIET_STEPS = 50     # consecutive quiescent steps before truncating
_TAIL_WARN = 1e-6     # warn when the unprocessed tail exceeds this fraction of Q


@dataclass(frozen=True)
class ProtectionConstants:
    """Scalars derived from (intercept_prob, miss_weight).

    carry = miss_weight * (1 - intercept_prob) multiplies the estimate mean
    each missed round; rho = miss_weight * intercept_prob / (1 - carry);
    nu = miss_weight - (1 - intercept_prob) - rho * intercept_prob.
    Requires (1 - intercept_prob) * miss_weight^2 < 1, which also gives
    |carry| < 1 and miss_weight * carry < 1.
    """

    intercept_prob: float
    miss_weight: float

    def __post_init__(self):
        if not 0.0 < self.intercept_prob < 1.0:
            raise ValueError("intercept_prob must lie strictly between 0 and 1")
        if (1.0 - self.intercept_prob) * self.miss_weight ** 2 >= 1.0:
            raise ValueError(
                "protection undefined: (1-intercept_prob) * miss_weight^2 >= 1")

    @property
    def gamma(self):
        return self.intercept_prob

    @property
    def gbar(self):
        return 1.0 - self.intercept_prob

    @property
    def carry(self):
        return self.miss_weight * self.gbar

    @property
    def cbar(self):
        return 1.0 - self.carry

    @property
    def bc(self):
        return self.miss_weight * self.carry

    @property
    def rho(self):
        return self.miss_weight * self.gamma / self.cbar

    @property
    def nu(self):
        return self.miss_weight - self.gbar - self.rho * self.gamma

    def h(self, eta):
        """Bound coefficient (b^2 + b - |rho|/eta) / (1 - b*carry)."""
        if eta <= 0:
            raise ValueError("eta must be positive")
        b = self.miss_weight
        return (b * b + b - abs(self.rho) / eta) / (1.0 - self.bc)


@dataclass(frozen=True)
class MomentSeries:
    """Estimator moment recursions and their accumulated series.

    Ez[t], Eznorm[t], Ee[t] hold E z_t, E||z_t||^2, E e_t for the processed
    steps t = 0..horizon_used. Q, R, P, S are the series sum ||xi_t||^2,
    sum <E z_t, xi_t>, sum <E e_t, xi_t>, sum E||z_t||^2 over t >= 0, the
    last closed with its geometric tail. tail_estimate bounds what the
    truncation left out of Q.
    """

    Ez: np.ndarray
    Eznorm: np.ndarray
    Ee: np.ndarray
    Q: float
    P: float
    R: float
    S: float
    horizon_used: int
    tail_estimate: float


def _split_innovations(innovations):
    xi = np.asarray(innovations, dtype=float)
    if xi.ndim != 2 or xi.shape[0] < 1:
        raise ValueError("innovations must be a (T+1, m) array whose first "
                         "row is xi_{-1} = x_0")
    return xi[0], xi[1:]


def _init_vector(value, m):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1:
        v = np.full(m, v[0])
    if v.shape != (m,):
        raise ValueError(f"estimate_init must broadcast to dimension {m}")
    return v


def moment_series(innovations, intercept_prob, miss_weight,
                  estimate_init=0.0, estimate_init_sq=None):
    """Advance the estimator moment recursions along an innovation sequence.

    estimate_init is E z_{-1}; estimate_init_sq is E||z_{-1}||^2 and defaults
    to ||estimate_init||^2 (deterministic initialization). The recursions are
    truncated once the innovations stay quiescent for 50 consecutive steps;
    the geometric tail of S is then added in closed form and the skipped
    quadratic variation is reported (with a warning when it is material).
    """
    cst = ProtectionConstants(intercept_prob, miss_weight)
    x0, xi = _split_innovations(innovations)
    m = x0.shape[0]
    gamma, gbar, c, bc = cst.gamma, cst.gbar, cst.carry, cst.bc

    z_init = _init_vector(estimate_init, m)
    z_init_sq = float(z_init @ z_init) if estimate_init_sq is None else float(estimate_init_sq)
    if z_init_sq < 0:
        raise ValueError("estimate_init_sq must be nonnegative")

    ez = gamma * x0 + gbar * z_init
    ezn = gbar * z_init_sq + gamma * float(x0 @ x0)
    ee = gbar * (z_init - x0)

    ez_seq = [ez.copy()]
    ezn_seq = [ezn]
    ee_seq = [ee.copy()]
    q = r = p = s = 0.0
    quiet = 0
    used = 0
    for t in range(xi.shape[0]):
        step = xi[t]
        sq = float(step @ step)
        q += sq
        r += float(ez @ step)
        p += float(ee @ step)
        s += ezn
        ee = ee + c * ez - gbar * step
        ez = c * ez + gamma * step
        ezn = bc * ezn + gamma * sq
        ez_seq.append(ez.copy())
        ezn_seq.append(ezn)
        ee_seq.append(ee.copy())
        used = t + 1
        quiet = quiet + 1 if sq < _QUIET_SQ * (1.0 + q) else 0
        if quiet >= _QUIET_STEPS:
            break

    s += ezn / (1.0 - bc)  # remaining steps contribute a geometric series

    skipped = xi[used:]
    tail = float((skipped * skipped).sum())
    sq_seq = (xi * xi).sum(axis=1)
    if used >= 2 and sq_seq[used - 1] > 0 and sq_seq[used - 2] > 0:
        ratio = min(sq_seq[used - 1] / sq_seq[used - 2], 0.999)
        tail += sq_seq[used - 1] * ratio / (1.0 - ratio)
    if q > 0 and tail > _TAIL_WARN * q:
        warnings.warn(
            f"innovation tail estimate {tail:.3e} exceeds {_TAIL_WARN:g} of the "
            f"accumulated quadratic variation {q:.3e}; the trajectory looks "
            "unconverged at the truncation horizon", RuntimeWarning, stacklevel=2)

    return MomentSeries(Ez=np.array(ez_seq), Eznorm=np.array(ezn_seq),
                        Ee=np.array(ee_seq), Q=q, P=p, R=r, S=s,
                        horizon_used=used, tail_estimate=tail)


def _exact_from_series(series, x0, x_star, cst, z_init, z_init_sq):
    gamma, gbar, cbar = cst.gamma, cst.gbar, cst.cbar
    b = cst.miss_weight
    bbar = 1.0 - b
    rho, nu = cst.rho, cst.nu
    d0 = np.asarray(x_star, dtype=float) - x0
    x0_sq = float(x0 @ x0)
    init_gap_sq = float((z_init - x0) @ (z_init - x0)) + (z_init_sq - float(z_init @ z_init))
    kappa = b * (b + 1.0) / (1.0 - cst.bc)
    rhs = (kappa * (gbar * z_init_sq + gamma * x0_sq)
           - b * x0_sq
           + init_gap_sq
           + (kappa + (1.0 - rho)) * gamma * series.Q
           - 2.0 * rho * series.R
           - (2.0 * bbar * gbar / cbar) * float((z_init - bbar * x0) @ d0)
           - nu * float(d0 @ d0))
    return gbar / cbar * rhs


def exact_protection(innovations, x_star, intercept_prob, miss_weight,
                     estimate_init=0.0, estimate_init_sq=None):
    """Limiting expected squared estimation error E||e_inf||^2.

    x_star is the trajectory's limit (ground truth from the centralized
    solver). estimate_init_sq enables the random-initialization variant
    through E||z_{-1}||^2; by default z_{-1} is the given deterministic
    vector.
    """
    cst = ProtectionConstants(intercept_prob, miss_weight)
    x0, _ = _split_innovations(innovations)
    z_init = _init_vector(estimate_init, x0.shape[0])
    z_init_sq = float(z_init @ z_init) if estimate_init_sq is None else float(estimate_init_sq)
    series = moment_series(innovations, intercept_prob, miss_weight,
                           estimate_init, estimate_init_sq)
    return _exact_from_series(series, x0, x_star, cst, z_init, z_init_sq)


def _bound_from_series(series, x0, x_star, cst, z_init, eta):
    gamma, gbar, cbar = cst.gamma, cst.gbar, cst.cbar
    b = cst.miss_weight
    bbar = 1.0 - b
    rho, nu = cst.rho, cst.nu
    d0 = np.asarray(x_star, dtype=float) - x0
    h = cst.h(eta)
    rhs = (float((z_init - x0) @ (z_init - x0))
           + h * gbar * float(z_init @ z_init)
           + (h * gamma - b) * float(x0 @ x0)
           + (gamma * (1.0 - rho) + h * gamma - abs(rho) * eta) * series.Q
           - (2.0 * bbar * gbar / cbar) * float((z_init - bbar * x0) @ d0)
           - nu * float(d0 @ d0))
    return gbar / cbar * rhs


def protection_lower_bound(innovations, x_star, intercept_prob, miss_weight,
                           estimate_init=0.0, eta=1.0):
    """Lower bound on E||e_inf||^2, free of the cross series R.

    Valid for every eta > 0 and tight at miss_weight = 0. Pass
    eta="optimize" to maximize the bound over a logarithmic grid in
    [1e-3, 1e3] refined by golden-section search.
    """
    cst = ProtectionConstants(intercept_prob, miss_weight)
    x0, _ = _split_innovations(innovations)
    z_init = _init_vector(estimate_init, x0.shape[0])
    series = moment_series(innovations, intercept_prob, miss_weight, estimate_init)

    def value(e):
        return _bound_from_series(series, x0, x_star, cst, z_init, e)

    if not isinstance(eta, str):
        return value(float(eta))
    if eta != "optimize":
        raise ValueError("eta must be a positive number or 'optimize'")
    grid = np.logspace(-3.0, 3.0, 61)
    vals = np.array([value(e) for e in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if lo == hi:
        return float(vals[k])
    res = minimize_scalar(lambda le: -value(np.exp(le)),
                          bounds=(np.log(lo), np.log(hi)), method="bounded",
                          options={"xatol": 1e-10})
    return float(max(vals[k], -res.fun))


def protection_b0(innovations, x_star, intercept_prob, estimate_init=0.0):
    """Closed form at miss_weight = 0: the adversary keeps nothing on a miss."""
    cst = ProtectionConstants(intercept_prob, 0.0)
    x0, _ = _split_innovations(innovations)
    z_init = _init_vector(estimate_init, x0.shape[0])
    series = moment_series(innovations, intercept_prob, 0.0, estimate_init)
    gamma, gbar = cst.gamma, cst.gbar
    d0 = np.asarray(x_star, dtype=float) - x0
    gap = z_init - x0 - gbar * d0
    return (gamma * gbar ** 2 * float(d0 @ d0)
            + gbar * float(gap @ gap)
            + gamma * gbar * series.Q)


def protection_b1(innovations, intercept_prob):
    """Unbiased-adversary case miss_weight = 1 with z_{-1} = 0.

    Returns (mean_error, value): the limiting mean error is exactly zero and
    the value is (gbar/gamma) * (||x_0||^2 + sum_t E||z_t - xi_t||^2),
    evaluated through the moment recursions as Q - 2R + S.
    """
    x0, _ = _split_innovations(innovations)
    series = moment_series(innovations, intercept_prob, 1.0, 0.0)
    gamma = intercept_prob
    gbar = 1.0 - gamma
    x0_sq = float(x0 @ x0)
    value = gbar / gamma * (x0_sq + series.Q - 2.0 * series.R + series.S)
    return np.zeros_like(x0), value


def entropy_floor(innovations, intercept_prob):
    """gamma * (1-gamma) * total quadratic variation including the bootstrap:
    a floor on the entropy power of the adversary's limiting error."""
    if not 0.0 < intercept_prob < 1.0:
        raise ValueError("intercept_prob must lie strictly between 0 and 1")
    xi = np.asarray(innovations, dtype=float)
    return intercept_prob * (1.0 - intercept_prob) * float((xi * xi).sum())


def network_protection(per_node):
    """Most conservative system-level metric: (min value, argmin node id)."""
    if not per_node:
        raise ValueError("per-node protection map is empty")
    node = min(sorted(per_node), key=lambda k: per_node[k])
    return per_node[node], node


def _terminal_samples(traj, cfg, runs, horizon=None, mu_stream=None, batch_size=4096):
    """Per-run tail-closed conditional moments of the terminal error.

    Returns (values, error_means): values[r] = E[||e_inf||^2 | run r] and
    error_means[r] = E[e_inf | run r], both conditioned on the run's state
    at the horizon with the trajectory frozen beyond it.
    """
    if cfg.mode != "innovation_sharing":
        raise ValueError("Monte Carlo protection is defined for innovation-sharing runs")
    msgs = target_messages(traj, cfg)
    if horizon is None:
        horizon = traj.length
    if not 0 <= horizon <= traj.length:
        raise ValueError("horizon must index a recorded state")
    if traj.converged_at is not None and horizon < traj.converged_at:
        warnings.warn("horizon precedes the recorded convergence index; the "
                      "tail closure will be biased", RuntimeWarning, stacklevel=3)
    steps = horizon + 1
    m = msgs.shape[1]
    x_h = traj.node_states(cfg.target)[horizon]
    eg, eg2 = tail_weight_moments(cfg.intercept_prob, cfg.miss_weight)
    z_init = np.broadcast_to(np.atleast_1d(np.asarray(cfg.estimate_init, dtype=float)), (m,))

    values = np.empty(runs)
    error_means = np.empty((runs, m))
    b = cfg.miss_weight
    for start in range(0, runs, batch_size):
        stop = min(start + batch_size, runs)
        size = stop - start
        mu = np.empty((size, steps), dtype=bool)
        for r in range(start, stop):
            if mu_stream is None:
                mu[r - start] = bernoulli_stream(cfg.seed, r, steps, cfg.intercept_prob)
            else:
                mu[r - start] = np.asarray(mu_stream(r, steps), dtype=bool)
        z = np.tile(z_init.astype(float), (size, 1))
        acc = np.zeros((size, m))
        for t in range(steps):
            b_t = 1.0 if t == 0 else b
            z = np.where(mu[:, t:t + 1], msgs[t][None, :], b_t * z)
            acc += z
        e = acc - x_h[None, :]
        values[start:stop] = ((e * e).sum(axis=1)
                              + 2.0 * eg * (e * z).sum(axis=1)
                              + eg2 * (z * z).sum(axis=1))
        error_means[start:stop] = e + eg * z
    return values, error_means


def monte_carlo_protection(traj, cfg, runs, horizon=None, mu_stream=None):
    """Monte Carlo estimate of E||e_inf||^2 with analytic tail closure.

    Averages the per-run conditional expectation given the state at the
    horizon (innovations treated as zero beyond it), which removes horizon
    bias for converged trajectories. Returns (mean, standard error).
    """
    if runs < 100:
        raise ValueError("need at least 100 runs for a meaningful estimate")
    ProtectionConstants(cfg.intercept_prob, cfg.miss_weight)
    values, _ = _terminal_samples(traj, cfg, runs, horizon, mu_stream)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(runs))
    return mean, stderr


def monte_carlo_error_mean(traj, cfg, runs, horizon=None, mu_stream=None):
    """Componentwise Monte Carlo estimate of E e_inf: (mean, standard error)."""
    if runs < 100:
        raise ValueError("need at least 100 runs for a meaningful estimate")
    ProtectionConstants(cfg.intercept_prob, cfg.miss_weight)
    _, error_means = _terminal_samples(traj, cfg, runs, horizon, mu_stream)
    mean = error_means.mean(axis=0)
    se = error_means.std(axis=0, ddof=1) / np.sqrt(runs)
    return mean, se


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample moments of the adversary process at selected time indices."""

    times: np.ndarray
    runs: int
    z_mean: np.ndarray       # (K, m)
    z_mean_se: np.ndarray
    z_sq_mean: np.ndarray    # (K,) mean of ||z_t||^2
    z_sq_mean_se: np.ndarray
    e_mean: np.ndarray       # (K, m)
    e_mean_se: np.ndarray
    e_sq_mean: np.ndarray    # (K,) mean of ||e_t||^2
    e_sq_mean_se: np.ndarray


def simulate_moments(traj, cfg, runs, times, mu_stream=None, batch_size=8192):
    """Empirical E z_t, E||z_t||^2, E e_t, E||e_t||^2 across independent runs.

    Works for both wire modes; times index recorded steps. Used to validate
    the moment recursions and the state-sharing decay.
    """
    msgs = target_messages(traj, cfg)
    xs = traj.node_states(cfg.target)
    times = np.array(sorted(set(int(t) for t in times)))
    if times.size == 0 or times[0] < 0 or times[-1] > traj.length:
        raise ValueError("times must be nonempty and index recorded steps")
    steps = int(times[-1]) + 1
    m = msgs.shape[1]
    pos = {int(t): k for k, t in enumerate(times)}
    k_times = times.size
    innovation = cfg.mode == "innovation_sharing"
    z_init = np.broadcast_to(np.atleast_1d(np.asarray(cfg.estimate_init, dtype=float)), (m,))

    z_sum = np.zeros((k_times, m)); z_sum2 = np.zeros((k_times, m))
    zsq_sum = np.zeros(k_times); zsq_sum2 = np.zeros(k_times)
    e_sum = np.zeros((k_times, m)); e_sum2 = np.zeros((k_times, m))
    esq_sum = np.zeros(k_times); esq_sum2 = np.zeros(k_times)

    for start in range(0, runs, batch_size):
        stop = min(start + batch_size, runs)
        size = stop - start
        mu = np.empty((size, steps), dtype=bool)
        for r in range(start, stop):
            if mu_stream is None:
                mu[r - start] = bernoulli_stream(cfg.seed, r, steps, cfg.intercept_prob)
            else:
                mu[r - start] = np.asarray(mu_stream(r, steps), dtype=bool)
        z = np.tile(z_init.astype(float), (size, 1))
        acc = np.zeros((size, m))
        for t in range(steps):
            b_t = 1.0 if t == 0 else cfg.miss_weight
            z = np.where(mu[:, t:t + 1], msgs[t][None, :], b_t * z)
            if innovation:
                acc += z
                x_hat = acc
            else:
                x_hat = z
            k = pos.get(t)
            if k is not None:
                e = x_hat - xs[t][None, :]
                z_sum[k] += z.sum(axis=0); z_sum2[k] += (z * z).sum(axis=0)
                e_sum[k] += e.sum(axis=0); e_sum2[k] += (e * e).sum(axis=0)
                znorm = (z * z).sum(axis=1)
                enorm = (e * e).sum(axis=1)
                zsq_sum[k] += znorm.sum(); zsq_sum2[k] += (znorm * znorm).sum()
                esq_sum[k] += enorm.sum(); esq_sum2[k] += (enorm * enorm).sum()

    def stats(total, total2):
        mean = total / runs
        var = np.maximum(total2 / runs - mean ** 2, 0.0) * runs / max(runs - 1, 1)
        return mean, np.sqrt(var / runs)

    z_mean, z_se = stats(z_sum, z_sum2)
    zsq_mean, zsq_se = stats(zsq_sum, zsq_sum2)
    e_mean, e_se = stats(e_sum, e_sum2)
    esq_mean, esq_se = stats(esq_sum, esq_sum2)
    return EmpiricalMoments(times=times, runs=runs,
                            z_mean=z_mean, z_mean_se=z_se,
                            z_sq_mean=zsq_mean, z_sq_mean_se=zsq_se,
                            e_mean=e_mean, e_mean_se=e_se,
                            e_sq_mean=esq_mean, e_sq_mean_se=esq_se)


@dataclass(frozen=True)
class ProtectionReport:
    """Protection summary for one (gamma, miss_weight) point on a trajectory."""

    intercept_prob: float
    miss_weight: float
    exact: float
    lower_bound: float
    lower_bound_opt: float
    b0_value: float
    b1_value: float
    entropy_floor: float
    per_node: dict
    network_min: float
    network_argmin: int
    mc_mean: float = None
    mc_stderr: float = None


def protection_report(traj, x_star, intercept_prob, miss_weight,
                      estimate_init=0.0, eta=1.0, mc_cfg=None, mc_runs=0):
    """Evaluate exact/bounded/special-case protection for every node.

    x_star is (m,) or (n, m) (per-node references). Bounds and special
    cases are reported at the network-argmin node. mc_cfg + mc_runs > 0
    adds a Monte Carlo check at that node.
    """
    x_star = np.asarray(x_star, dtype=float)
    per_node = {}
    for i in range(traj.n_nodes):
        ref = x_star[i] if x_star.ndim == 2 else x_star
        per_node[i] = exact_protection(traj.node_innovations(i), ref,
                                       intercept_prob, miss_weight, estimate_init)
    net_min, argmin = network_protection(per_node)
    ref = x_star[argmin] if x_star.ndim == 2 else x_star
    xi = traj.node_innovations(argmin)
    lb = protection_lower_bound(xi, ref, intercept_prob, miss_weight, estimate_init, eta)
    lb_opt = protection_lower_bound(xi, ref, intercept_prob, miss_weight,
                                    estimate_init, "optimize")
    b0 = protection_b0(xi, ref, intercept_prob, estimate_init)
    _, b1 = protection_b1(xi, intercept_prob)
    floor = entropy_floor(xi, intercept_prob)
    mc_mean = mc_stderr = None
    if mc_runs and mc_cfg is not None:
        mc_mean, mc_stderr = monte_carlo_protection(traj, mc_cfg, mc_runs)
    return ProtectionReport(intercept_prob=intercept_prob, miss_weight=miss_weight,
                            exact=net_min, lower_bound=lb, lower_bound_opt=lb_opt,
                            b0_value=b0, b1_value=b1, entropy_floor=floor,
                            per_node=per_node, network_min=net_min,
                            network_argmin=argmin, mc_mean=mc_mean, mc_stderr=mc_stderr)
