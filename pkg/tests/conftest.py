import numpy as np
import pytest

from innoshare import (AlgorithmConfig, Trajectory, generate_random_strongly_connected,
                       global_minimizer, metropolis_weights, run_dico, synth_logistic)


@pytest.fixture(scope="session")
def paper_instance():
    """n=10, m=3, 10 samples per node, reg 1, step 0.01."""
    spec = synth_logistic(10, 3, 10, 1.0, seed=3)
    g = generate_random_strongly_connected(10, 0.3, seed=7)
    w = metropolis_weights(g)
    x_star = global_minimizer(spec, tol=1e-10)
    return g, w, spec, x_star


@pytest.fixture(scope="session")
def paper_traj(paper_instance):
    g, w, spec, x_star = paper_instance
    x0 = np.random.default_rng(11).normal(size=(10, 3))
    cfg = AlgorithmConfig(step_size=0.01, init_states=x0, max_iters=20000,
                          stop_tol=1e-10)
    return run_dico(g, w, spec, cfg, x_star=x_star)


def innovations_trajectory(innovations):
    """Wrap a single-node innovation sequence (first row xi_{-1} = x_0)
    into a Trajectory whose states are the exact running sums."""
    xi = np.asarray(innovations, dtype=float)
    states = np.cumsum(xi, axis=0)
    return Trajectory(states=states[:, None, :], innovations=xi[:, None, :])


def geometric_innovations(rng, steps, m, decay=0.6, scale=1.0):
    """Random innovation sequence with geometric decay, bootstrap row first."""
    x0 = rng.normal(size=m)
    xi = scale * rng.normal(size=(steps, m)) * decay ** np.arange(steps)[:, None]
    return np.vstack([x0[None, :], xi])
