"""Experiment harness: configs, sweeps, result tables and plot-data emission.

A single JSON config with problem / graph / algorithm / adversary / output
blocks drives every command. Identical configs produce byte-identical result
tables, and every emitted row carries the seeds needed to regenerate it in
isolation.
"""

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import AdversaryConfig
from .consensus import (AlgorithmConfig, DivergenceError, convergence_time,
                        run_dco, run_dico, trajectory_to_csv)
from .graphs import generate_random_strongly_connected, metropolis_weights
from .objectives import global_minimizer, quadratic_objective, synth_logistic
from .protection import (ProtectionConstants, entropy_floor, exact_protection,
                         moment_series, monte_carlo_protection,
                         network_protection, protection_b0, protection_b1,
                         protection_lower_bound, protection_report,
                         simulate_moments)


@dataclass
class ProblemConfig:
    """Objective instance. kind "logistic" draws the synthetic regression
    problem; kind "quadratic" uses identity matrices and zero offsets
    (a minimal smoke instance, f_i = ||x||^2 / 2)."""

    n: int = 10
    m: int = 3
    samples_per_node: int = 10
    reg: float = 1.0
    seed: int = 3
    kind: str = "logistic"


@dataclass
class GraphConfig:
    extra_edge_prob: float = 0.3
    seed: int = 7


@dataclass
class InitConfig:
    """Initial states: explicit (n, m) values, or scale * seeded normal base."""

    scale: float = 1.0
    scales: list = None       # tradeoff sweep over x0 scales
    seed: int = 11
    explicit: list = None


@dataclass
class AlgoConfig:
    step_size: float = 0.01
    step_sizes: list = None   # tradeoff sweep over step sizes
    tracker: str = "extra"
    max_iters: int = 20000
    stop_tol: float = None
    subgrad_beta0: float = 1.0
    subgrad_power: float = 1.0
    init: InitConfig = field(default_factory=InitConfig)
    check_state_sharing: bool = False


@dataclass
class AdversaryBlock:
    intercept_prob: float = 0.5
    intercept_probs: list = None      # decay-demo gamma list
    miss_weights: list = field(default_factory=lambda: [0.0])
    estimate_init: float = 0.0
    target: object = "all"            # node id or "all"
    mc_runs: int = 0
    seed: int = 0
    eta: float = 1.0


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv"])


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    algorithm: AlgoConfig = field(default_factory=AlgoConfig)
    adversary: AdversaryBlock = field(default_factory=AdversaryBlock)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return asdict(self)


_BLOCKS = {"problem": ProblemConfig, "graph": GraphConfig,
           "algorithm": AlgoConfig, "adversary": AdversaryBlock,
           "output": OutputConfig}


def _build_block(cls, data):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    if cls is AlgoConfig and "init" in data:
        data = dict(data)
        data["init"] = _build_block(InitConfig, data["init"])
    return cls(**data)


def config_from_dict(data):
    unknown = set(data) - set(_BLOCKS)
    if unknown:
        raise ValueError(f"unknown config blocks: {sorted(unknown)}")
    kwargs = {name: _build_block(cls, data.get(name, {}))
              for name, cls in _BLOCKS.items()}
    return ExperimentConfig(**kwargs)


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg):
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def apply_overrides(data, overrides):
    """Apply {dotted.key.path: value} overrides to a nested config dict.

    String values are parsed as JSON literals when possible, so numbers,
    lists and null work from the command line.
    """
    for path, raw in overrides.items():
        value = raw
        if isinstance(raw, str):
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return data


def make_x0(init, n, m, scale=None):
    if init.explicit is not None:
        x0 = np.asarray(init.explicit, dtype=float)
        if x0.shape != (n, m):
            raise ValueError(f"explicit init states must have shape ({n}, {m})")
        return x0 if scale is None else scale * x0
    base = np.random.default_rng(init.seed).normal(size=(n, m))
    return (init.scale if scale is None else scale) * base


def build_instance(cfg):
    """Graph, weights, objective and centralized minimizer for a config."""
    p = cfg.problem
    if p.kind == "logistic":
        spec = synth_logistic(p.n, p.m, p.samples_per_node, p.reg, p.seed)
    elif p.kind == "quadratic":
        spec = quadratic_objective(np.tile(np.eye(p.m), (p.n, 1, 1)),
                                   np.zeros((p.n, p.m)))
    else:
        raise ValueError(f"unknown problem kind {p.kind!r}")
    g = generate_random_strongly_connected(p.n, cfg.graph.extra_edge_prob, cfg.graph.seed)
    w = metropolis_weights(g)
    x_star = global_minimizer(spec, tol=1e-10)
    return g, w, spec, x_star


def _algo_config(cfg, x0, step_size=None):
    a = cfg.algorithm
    return AlgorithmConfig(step_size=a.step_size if step_size is None else step_size,
                           init_states=x0, tracker=a.tracker,
                           max_iters=a.max_iters, stop_tol=a.stop_tol,
                           subgrad_beta0=a.subgrad_beta0,
                           subgrad_power=a.subgrad_power)


def _seed_columns(cfg):
    return {"problem_seed": cfg.problem.seed, "graph_seed": cfg.graph.seed,
            "x0_seed": cfg.algorithm.init.seed, "adversary_seed": cfg.adversary.seed}


@dataclass
class ResultTable:
    """Ordered rows with a fixed column set, written as deterministic CSV."""

    columns: list
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.columns)
            for row in self.rows:
                wr.writerow([_fmt(row.get(c)) for c in self.columns])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_manifest(cfg, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"toolkit_version": __version__, "config_hash": config_hash(cfg),
                "config": cfg.to_dict()}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plot_data(path, header, rows):
    """Plain plot-data file: one x column plus named y columns."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join("nan" if v is None else str(_fmt(v)) for v in row) + "\n")


def _out_dir(cfg, out_dir):
    return Path(out_dir if out_dir is not None else cfg.output.directory)


def cmd_simulate(cfg, out_dir=None):
    """Run DICO on the configured instance and persist the trajectory."""
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, w, spec, x_star = build_instance(cfg)
    x0 = make_x0(cfg.algorithm.init, spec.n, spec.m)
    acfg = _algo_config(cfg, x0)
    traj = run_dico(g, w, spec, acfg, x_star=x_star)
    summary = {
        "iterations": traj.length,
        "converged_at": traj.converged_at,
        "convergence_time_1pct": convergence_time(traj, x_star, 0.01),
        "final_max_dist_to_x_star": float(
            np.linalg.norm(traj.states[-1] - x_star, axis=1).max()),
        "x_star": [repr(float(v)) for v in x_star],
    }
    if cfg.algorithm.check_state_sharing:
        other = run_dco(g, w, spec, acfg, x_star=x_star)
        summary["state_sharing_identical"] = bool(
            np.array_equal(traj.states, other.states)
            and np.array_equal(traj.innovations, other.innovations))
    trajectory_to_csv(traj, out / "trajectory.csv")
    with open(out / "edges.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["src", "dst"])
        wr.writerows(g.edges())
    with open(out / "weights.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        for row in w.w:
            wr.writerow([repr(float(v)) for v in row])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(cfg, out)
    return traj, summary


SWEEP_COLUMNS = ["node", "b", "gamma", "alpha", "x0_scale", "valid", "exact",
                 "lower_bound", "lower_bound_opt", "b0", "b1", "mc_mean",
                 "mc_stderr", "Q", "R", "S", "entropy_floor",
                 "problem_seed", "graph_seed", "x0_seed", "adversary_seed"]


def _sweep_targets(cfg, n):
    t = cfg.adversary.target
    return list(range(n)) if t == "all" else [int(t)]


def cmd_sweep_b(cfg, out_dir=None, threads=1):
    """Protection versus adversary weight for every target node.

    Each admissible weight gets exact protection, the lower bound at the
    configured eta and its eta-optimized value, the two special cases, the
    series terms and an optional Monte Carlo check. Weights violating
    (1-gamma) b^2 < 1 are kept as flagged, valueless rows.
    """
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, w, spec, x_star = build_instance(cfg)
    x0 = make_x0(cfg.algorithm.init, spec.n, spec.m)
    acfg = _algo_config(cfg, x0)
    traj = run_dico(g, w, spec, acfg, x_star=x_star)
    gamma = cfg.adversary.intercept_prob
    z0 = cfg.adversary.estimate_init
    nodes = _sweep_targets(cfg, spec.n)
    seeds = _seed_columns(cfg)
    cells = [(b_idx, float(b), node)
             for b_idx, b in enumerate(cfg.adversary.miss_weights)
             for node in nodes]

    def run_cell(cell):
        b_idx, b, node = cell
        row = {"node": node, "b": b, "gamma": gamma, "alpha": cfg.algorithm.step_size,
               "x0_scale": cfg.algorithm.init.scale, **seeds}
        if (1.0 - gamma) * b * b >= 1.0:
            row["valid"] = 0
            return cell, row
        row["valid"] = 1
        xi = traj.node_innovations(node)
        series = moment_series(xi, gamma, b, z0)
        row["exact"] = exact_protection(xi, x_star, gamma, b, z0)
        row["lower_bound"] = protection_lower_bound(xi, x_star, gamma, b, z0,
                                                    cfg.adversary.eta)
        row["lower_bound_opt"] = protection_lower_bound(xi, x_star, gamma, b, z0,
                                                        "optimize")
        row["b0"] = protection_b0(xi, x_star, gamma, z0)
        row["b1"] = protection_b1(xi, gamma)[1]
        row["Q"], row["R"], row["S"] = series.Q, series.R, series.S
        row["entropy_floor"] = entropy_floor(xi, gamma)
        if cfg.adversary.mc_runs:
            mc_cfg = AdversaryConfig(intercept_prob=gamma, miss_weight=b,
                                     estimate_init=z0, target=node,
                                     seed=cfg.adversary.seed + 7919 * b_idx + node)
            row["mc_mean"], row["mc_stderr"] = monte_carlo_protection(
                traj, mc_cfg, cfg.adversary.mc_runs)
        return cell, row

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = dict(pool.map(run_cell, cells))
    table = ResultTable(SWEEP_COLUMNS)
    for cell in cells:  # deterministic key order
        table.append(results[cell])
    table.write_csv(out / "sweep_b.csv")

    plot_rows = []
    for b_idx, b in enumerate(cfg.adversary.miss_weights):
        b = float(b)
        rows = [results[(b_idx, b, node)] for node in nodes]
        if not rows or rows[0]["valid"] == 0:
            continue
        per_node = {r["node"]: r["exact"] for r in rows}
        _, argmin = network_protection(per_node)
        best = next(r for r in rows if r["node"] == argmin)
        plot_rows.append([b, best["exact"], best["lower_bound"],
                          best["lower_bound_opt"], best["b0"], best["b1"]])
    _plot_data(out / "fig_sweep_b.dat",
               ["b", "exact", "lower_bound", "lower_bound_opt", "b0", "b1"],
               plot_rows)
    write_manifest(cfg, out)
    return table


TRADEOFF_COLUMNS = ["alpha", "x0_scale", "b", "diverged", "convergence_time",
                    "protection", "argmin_node", "Q_min_node",
                    "problem_seed", "graph_seed", "x0_seed", "adversary_seed"]


def cmd_tradeoff(cfg, out_dir=None, threads=1):
    """Convergence time versus protection over a (step size, x0 scale) grid."""
    alphas = cfg.algorithm.step_sizes
    scales = cfg.algorithm.init.scales
    if not alphas:
        raise ValueError("tradeoff needs a nonempty algorithm.step_sizes list")
    if not scales:
        raise ValueError("tradeoff needs a nonempty algorithm.init.scales list")
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, w, spec, x_star = build_instance(cfg)
    gamma = cfg.adversary.intercept_prob
    z0 = cfg.adversary.estimate_init
    seeds = _seed_columns(cfg)
    weights = [float(b) for b in cfg.adversary.miss_weights]
    cells = [(float(a), float(s)) for a in alphas for s in scales]

    def run_cell(cell):
        alpha, scale = cell
        x0 = make_x0(cfg.algorithm.init, spec.n, spec.m, scale=scale)
        acfg = _algo_config(cfg, x0, step_size=alpha)
        base = {"alpha": alpha, "x0_scale": scale, **seeds}
        try:
            traj = run_dico(g, w, spec, acfg, x_star=x_star)
        except DivergenceError:
            return cell, [dict(base, b=b, diverged=1) for b in weights]
        tc = convergence_time(traj, x_star, 0.01)
        rows = []
        for b in weights:
            row = dict(base, b=b, diverged=0, convergence_time=tc)
            if (1.0 - gamma) * b * b >= 1.0:
                row["diverged"] = 0
                rows.append(row)
                continue
            per_node = {i: exact_protection(traj.node_innovations(i), x_star,
                                            gamma, b, z0)
                        for i in range(spec.n)}
            value, argmin = network_protection(per_node)
            row["protection"] = value
            row["argmin_node"] = argmin
            row["Q_min_node"] = moment_series(traj.node_innovations(argmin),
                                              gamma, b, z0).Q
            rows.append(row)
        return cell, rows

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = dict(pool.map(run_cell, cells))
    table = ResultTable(TRADEOFF_COLUMNS)
    for cell in cells:
        for row in results[cell]:
            table.append(row)
    table.write_csv(out / "tradeoff.csv")

    for b in weights:
        rows = []
        for alpha, scale in cells:
            for row in results[(alpha, scale)]:
                if row["b"] == b and not row["diverged"]:
                    rows.append([scale, alpha, row.get("convergence_time"),
                                 row.get("protection")])
        _plot_data(out / f"fig_tradeoff_b{b:+.2f}.dat",
                   ["x0_scale", "alpha", "convergence_time", "protection"], rows)
    write_manifest(cfg, out)
    return table


def cmd_theorem1(cfg, out_dir=None):
    """State-sharing leak demo: empirical E||e_t||^2 decays to zero."""
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, w, spec, x_star = build_instance(cfg)
    x0 = make_x0(cfg.algorithm.init, spec.n, spec.m)
    acfg = _algo_config(cfg, x0)
    traj = run_dico(g, w, spec, acfg, x_star=x_star)
    tc = convergence_time(traj, x_star, 0.01)
    horizon = min(2 * tc if tc is not None else traj.length, traj.length)
    times = np.unique(np.linspace(0, horizon, 61).astype(int))
    gammas = cfg.adversary.intercept_probs or [0.1, 0.5, 0.9]
    runs = cfg.adversary.mc_runs or 1000
    target = 0 if cfg.adversary.target == "all" else int(cfg.adversary.target)

    table = ResultTable(["gamma", "t", "mean_sq_error", "stderr"])
    curves = {}
    for gamma in gammas:
        acfg_adv = AdversaryConfig(intercept_prob=float(gamma), miss_weight=1.0,
                                   estimate_init=0.0, mode="state_sharing",
                                   target=target, seed=cfg.adversary.seed)
        mom = simulate_moments(traj, acfg_adv, runs, times)
        curves[float(gamma)] = mom
        for k, t in enumerate(mom.times):
            table.append({"gamma": gamma, "t": int(t),
                          "mean_sq_error": mom.e_sq_mean[k],
                          "stderr": mom.e_sq_mean_se[k]})
    table.write_csv(out / "theorem1_decay.csv")
    header = ["t"] + [f"gamma_{g:g}" for g in curves]
    rows = [[int(t)] + [curves[g].e_sq_mean[k] for g in curves]
            for k, t in enumerate(times)]
    _plot_data(out / "fig_theorem1.dat", header, rows)
    summary = {f"{g:g}": {"initial": float(curves[g].e_sq_mean[0]),
                          "final": float(curves[g].e_sq_mean[-1]),
                          "ratio": float(curves[g].e_sq_mean[-1]
                                         / curves[g].e_sq_mean[0])}
               for g in curves}
    with open(out / "theorem1_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(cfg, out)
    return table, summary


def cmd_protect(cfg, out_dir=None):
    """Single-point analytics: one protection report at the configured gamma/b."""
    out = _out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, w, spec, x_star = build_instance(cfg)
    x0 = make_x0(cfg.algorithm.init, spec.n, spec.m)
    acfg = _algo_config(cfg, x0)
    traj = run_dico(g, w, spec, acfg, x_star=x_star)
    gamma = cfg.adversary.intercept_prob
    b = float(cfg.adversary.miss_weights[0])
    ProtectionConstants(gamma, b)
    report = protection_report(traj, x_star, gamma, b,
                               estimate_init=cfg.adversary.estimate_init,
                               eta=cfg.adversary.eta)
    if cfg.adversary.mc_runs:
        mc_cfg = AdversaryConfig(intercept_prob=gamma, miss_weight=b,
                                 estimate_init=cfg.adversary.estimate_init,
                                 target=report.network_argmin,
                                 seed=cfg.adversary.seed)
        report = protection_report(traj, x_star, gamma, b,
                                   estimate_init=cfg.adversary.estimate_init,
                                   eta=cfg.adversary.eta, mc_cfg=mc_cfg,
                                   mc_runs=cfg.adversary.mc_runs)
    seeds = _seed_columns(cfg)
    table = ResultTable(["node", "gamma", "b", "exact", "is_network_min",
                         "lower_bound", "lower_bound_opt", "b0", "b1",
                         "entropy_floor", "mc_mean", "mc_stderr",
                         "problem_seed", "graph_seed", "x0_seed", "adversary_seed"])
    for node in sorted(report.per_node):
        row = {"node": node, "gamma": gamma, "b": b,
               "exact": report.per_node[node],
               "is_network_min": int(node == report.network_argmin), **seeds}
        if node == report.network_argmin:
            row.update({"lower_bound": report.lower_bound,
                        "lower_bound_opt": report.lower_bound_opt,
                        "b0": report.b0_value, "b1": report.b1_value,
                        "entropy_floor": report.entropy_floor,
                        "mc_mean": report.mc_mean, "mc_stderr": report.mc_stderr})
        table.append(row)
    table.write_csv(out / "protect.csv")
    write_manifest(cfg, out)
    return report
