import numpy as np
import pytest

from innoshare import (AlgorithmConfig, DivergenceError, all_gradients,
                       convergence_time, extra_tracker,
                       generate_random_strongly_connected, local_gradient,
                       metropolis_weights, quadratic_objective, run_dco,
                       run_dico, subgradient_tracker, synth_logistic,
                       trajectory_to_csv)
from innoshare.graphs import DirectedGraph, WeightMatrix


def single_node_quadratic():
    spec = quadratic_objective(np.eye(1)[None, :, :], np.zeros((1, 1)))
    g = DirectedGraph(1, {0: (0,)})
    w = WeightMatrix(np.array([[1.0]]))
    return g, w, spec


def small_instance(seed=0):
    spec = synth_logistic(5, 2, 4, 1.0, seed=seed)
    g = generate_random_strongly_connected(5, 0.4, seed=seed + 1)
    w = metropolis_weights(g)
    return g, w, spec


def test_single_node_extra_is_gradient_descent():
    g, w, spec = single_node_quadratic()
    cfg = AlgorithmConfig(step_size=0.1, init_states=np.array([[1.0]]), max_iters=50)
    traj = run_dco(g, w, spec, cfg)
    # oracle: plain gradient descent on f(x) = x^2/2
    x = 1.0
    for t in range(1, 51):
        x = x - 0.1 * x
        assert traj.states[t, 0, 0] == pytest.approx(x, rel=1e-12)
    assert abs(traj.states[-1, 0, 0]) < abs(traj.states[0, 0, 0]) * 1e-2


def test_single_node_dico_matches_dco_exactly():
    g, w, spec = single_node_quadratic()
    cfg = AlgorithmConfig(step_size=0.1, init_states=np.array([[1.0]]), max_iters=40)
    a = run_dco(g, w, spec, cfg)
    b = run_dico(g, w, spec, cfg)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.innovations, b.innovations)


@pytest.mark.parametrize("tracker", ["extra", "diminishing_subgradient"])
def test_dico_equals_dco_bitwise(tracker):
    g, w, spec = small_instance()
    x0 = np.random.default_rng(3).normal(size=(5, 2))
    cfg = AlgorithmConfig(step_size=0.02, init_states=x0, tracker=tracker,
                          max_iters=400)
    a = run_dco(g, w, spec, cfg)
    b = run_dico(g, w, spec, cfg)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.innovations, b.innovations)


def test_telescoping_identity_exact():
    g, w, spec = small_instance(seed=4)
    x0 = np.random.default_rng(9).normal(size=(5, 2)) * 3.0
    cfg = AlgorithmConfig(step_size=0.05, init_states=x0, max_iters=300)
    traj = run_dico(g, w, spec, cfg)
    # rebuild every state by the exact additions the decoder performs
    acc = np.zeros_like(traj.states[0])
    for t in range(traj.states.shape[0]):
        acc = acc + traj.innovations[t]
        assert np.array_equal(acc, traj.states[t])


def test_gradient_tracking_conservation():
    g, w, spec = small_instance(seed=7)
    x0 = np.random.default_rng(1).normal(size=(5, 2))
    cfg = AlgorithmConfig(step_size=0.02, init_states=x0, max_iters=200)
    traj = run_dico(g, w, spec, cfg)
    # with y_0 = local gradients, sum_i y_{i,t} tracks sum_i grad f_i(x_{i,t});
    # recompute y by replaying the tracker over the recorded states
    alpha = 0.02
    y = all_gradients(spec, traj.states[0])
    for t in range(traj.states.shape[0] - 1):
        cons = traj.innovations[t + 1] + alpha * y
        drift = y.sum(axis=0) - all_gradients(spec, traj.states[t]).sum(axis=0)
        assert np.linalg.norm(drift) <= 1e-9
        y = (y + all_gradients(spec, traj.states[t + 1])
             - all_gradients(spec, traj.states[t]) - cons / (2 * alpha))


def test_consensus_at_convergence(paper_instance):
    g, w, spec, x_star = paper_instance
    x0 = np.random.default_rng(2).normal(size=(10, 3))
    cfg = AlgorithmConfig(step_size=0.01, init_states=x0, max_iters=20000,
                          stop_tol=1e-6)
    traj = run_dico(g, w, spec, cfg, x_star=x_star)
    assert traj.converged_at is not None
    final = traj.states[-1]
    spread = max(np.linalg.norm(final[i] - final[j])
                 for i in range(10) for j in range(10))
    assert spread <= 10 * 1e-6 * np.linalg.norm(x_star)


def test_extra_tracker_matches_direct_transcription():
    rng = np.random.default_rng(5)
    y = rng.normal(size=3)
    g_next, g_cur = rng.normal(size=3), rng.normal(size=3)
    nbrs = rng.normal(size=(4, 3))
    weights = rng.random(4)
    self_state = rng.normal(size=3)
    alpha = 0.07
    got = extra_tracker(y, g_next, g_cur, nbrs, weights, self_state, alpha)
    # independent transcription of the update rule
    expected = y + g_next - g_cur
    for j in range(4):
        expected = expected - weights[j] * (nbrs[j] - self_state) / (2 * alpha)
    assert np.allclose(got, expected, rtol=1e-12)


def test_subgradient_tracker_values():
    spec = quadratic_objective(np.eye(2)[None, :, :], np.zeros((1, 2)))
    beta = lambda t: 1.0 / (t + 1.0)
    # at the stationary point the tracker vanishes
    assert np.allclose(subgradient_tracker(spec, 0, 3, np.zeros(2), beta), 0.0)
    # constant schedule reduces to the raw gradient
    x = np.array([2.0, -1.0])
    got = subgradient_tracker(spec, 0, 5, x, lambda t: 1.0)
    assert np.allclose(got, local_gradient(spec, 0, x))


def test_convergence_time_edges(paper_instance):
    g, w, spec, x_star = paper_instance
    x0 = np.tile(x_star, (10, 1))
    cfg = AlgorithmConfig(step_size=0.01, init_states=x0, max_iters=5)
    traj = run_dico(g, w, spec, cfg)
    assert convergence_time(traj, x_star, 0.01) == 0
    far = np.random.default_rng(0).normal(size=(10, 3)) * 50
    cfg = AlgorithmConfig(step_size=0.01, init_states=far, max_iters=3)
    short = run_dico(g, w, spec, cfg)
    assert convergence_time(short, x_star, 0.01) is None


def test_convergence_time_decreases_with_step_size(paper_instance):
    g, w, spec, x_star = paper_instance
    x0 = np.random.default_rng(4).normal(size=(10, 3))
    times = []
    for alpha in (0.01, 0.05):
        cfg = AlgorithmConfig(step_size=alpha, init_states=x0, max_iters=20000,
                              stop_tol=1e-6)
        traj = run_dico(g, w, spec, cfg, x_star=x_star)
        times.append(convergence_time(traj, x_star, 0.01))
    assert times[1] <= times[0]


def test_divergence_raises():
    g, w, spec = small_instance(seed=2)
    x0 = np.random.default_rng(0).normal(size=(5, 2))
    cfg = AlgorithmConfig(step_size=50.0, init_states=x0, max_iters=5000)
    with pytest.raises(DivergenceError):
        run_dico(g, w, spec, cfg)


def test_input_validation():
    g, w, spec = small_instance()
    with pytest.raises(ValueError):
        AlgorithmConfig(step_size=0.0, init_states=np.zeros((5, 2)))
    with pytest.raises(ValueError):
        AlgorithmConfig(step_size=0.1, init_states=np.zeros((5, 2)), max_iters=0)
    with pytest.raises(ValueError):
        AlgorithmConfig(step_size=0.1, init_states=np.zeros((5, 2)), tracker="nope")
    cfg = AlgorithmConfig(step_size=0.1, init_states=np.zeros((4, 2)))
    with pytest.raises(ValueError):
        run_dco(g, w, spec, cfg)
    # weights with mass off the graph edges
    dense = WeightMatrix(np.full((5, 5), 0.2))
    sparse_graph = DirectedGraph(5, {i: tuple(sorted({i, (i + 1) % 5, (i - 1) % 5}))
                                     for i in range(5)})
    cfg = AlgorithmConfig(step_size=0.1, init_states=np.zeros((5, 2)))
    with pytest.raises(ValueError):
        run_dco(sparse_graph, dense, spec, cfg)


def test_trajectory_csv(tmp_path):
    g, w, spec = single_node_quadratic()
    cfg = AlgorithmConfig(step_size=0.1, init_states=np.array([[1.0]]), max_iters=3)
    traj = run_dco(g, w, spec, cfg)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,node,component,x,xi"
    assert len(lines) == 1 + 4 * 1 * 1
    t0 = lines[1].split(",")
    assert float(t0[3]) == 1.0 and float(t0[4]) == 1.0  # x_0 and xi_{-1}
