"""Per-node local costs, gradient oracles and synthetic problem instances."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class ObjectiveSpec:
    """A sum of n strongly convex local costs over a shared m-dimensional decision.

    kind == "logistic": f_i(x) = reg/(2n)||x||^2 + sum_j ln(1 + exp(-(a_ij.x) l_ij))
    with per-node samples features[i] (D, m) and labels[i] (D,) in {-1, +1}.

    kind == "quadratic": f_i(x) = 1/2 (x - offset_i)' A_i (x - offset_i)
    with A_i symmetric positive definite.
    """

    n: int
    m: int
    kind: str
    features: np.ndarray = None   # (n, D, m) for logistic
    labels: np.ndarray = None     # (n, D) of +-1
    reg: float = None             # logistic ridge strength, > 0
    quad_mats: np.ndarray = None  # (n, m, m) SPD
    quad_offsets: np.ndarray = None  # (n, m)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need positive node count and dimension")
        if self.kind == "logistic":
            if self.features is None or self.labels is None or self.reg is None:
                raise ValueError("logistic spec needs features, labels and reg")
            if self.reg <= 0:
                raise ValueError("regularizer must be positive")
            feats = np.asarray(self.features, dtype=float)
            labs = np.asarray(self.labels, dtype=float)
            if feats.shape[0] != self.n or feats.shape[2] != self.m:
                raise ValueError("features must have shape (n, D, m)")
            if labs.shape != feats.shape[:2]:
                raise ValueError("labels must have shape (n, D)")
            if not np.all(np.abs(labs) == 1.0):
                raise ValueError("labels must be exactly +-1")
            object.__setattr__(self, "features", feats)
            object.__setattr__(self, "labels", labs)
        elif self.kind == "quadratic":
            if self.quad_mats is None or self.quad_offsets is None:
                raise ValueError("quadratic spec needs quad_mats and quad_offsets")
            mats = np.asarray(self.quad_mats, dtype=float)
            offs = np.asarray(self.quad_offsets, dtype=float)
            if mats.shape != (self.n, self.m, self.m):
                raise ValueError("quad_mats must have shape (n, m, m)")
            if offs.shape != (self.n, self.m):
                raise ValueError("quad_offsets must have shape (n, m)")
            for i, a in enumerate(mats):
                if not np.allclose(a, a.T, atol=1e-12):
                    raise ValueError(f"quad matrix {i} is not symmetric")
                if np.min(np.linalg.eigvalsh(a)) <= 0:
                    raise ValueError(f"quad matrix {i} is not positive definite")
            object.__setattr__(self, "quad_mats", mats)
            object.__setattr__(self, "quad_offsets", offs)
        else:
            raise ValueError(f"unknown objective kind {self.kind!r}")


def synth_logistic(n, m, samples_per_node, reg, seed):
    """Synthetic logistic instance with planted separator and 10% label noise.

    Features are standard normal; labels are sign(a . w_star) with each
    label flipped independently with probability 0.1. Deterministic for
    a fixed seed.
    """
    if n < 1 or m < 1 or samples_per_node < 1:
        raise ValueError("counts must be positive")
    if reg <= 0:
        raise ValueError("regularizer must be positive")
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, samples_per_node, m))
    w_star = rng.normal(size=m)
    labs = np.sign(feats @ w_star)
    labs[labs == 0] = 1.0
    flip = rng.random(size=labs.shape) < 0.1
    labs[flip] *= -1.0
    return ObjectiveSpec(n=n, m=m, kind="logistic", features=feats, labels=labs, reg=reg)


def quadratic_objective(mats, offsets):
    """Quadratic instance from per-node SPD matrices and offsets."""
    mats = np.asarray(mats, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    return ObjectiveSpec(n=mats.shape[0], m=mats.shape[1], kind="quadratic",
                         quad_mats=mats, quad_offsets=offsets)


def local_gradient(spec, i, x):
    """Gradient of node i's local cost at x."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "quadratic":
        return spec.quad_mats[i] @ (x - spec.quad_offsets[i])
    a = spec.features[i]
    l = spec.labels[i]
    s = expit(-l * (a @ x))  # sigmoid of the signed margin, overflow safe
    return (spec.reg / spec.n) * x - (l * s) @ a


def all_gradients(spec, states):
    """Stacked gradients: row i is node i's gradient at states[i] (n, m)."""
    states = np.asarray(states, dtype=float)
    if spec.kind == "quadratic":
        return np.einsum("ijk,ik->ij", spec.quad_mats, states - spec.quad_offsets)
    margins = np.einsum("idm,im->id", spec.features, states)
    s = expit(-spec.labels * margins)
    return (spec.reg / spec.n) * states - np.einsum("id,idm->im", spec.labels * s, spec.features)


def local_value(spec, i, x):
    """Node i's local cost at x."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "quadratic":
        d = x - spec.quad_offsets[i]
        return 0.5 * d @ spec.quad_mats[i] @ d
    a = spec.features[i]
    l = spec.labels[i]
    return (spec.reg / (2 * spec.n)) * x @ x + np.logaddexp(0.0, -l * (a @ x)).sum()


def global_value(spec, x):
    return sum(local_value(spec, i, x) for i in range(spec.n))


def global_gradient(spec, x):
    """Gradient of the summed objective at x."""
    return all_gradients(spec, np.tile(np.asarray(x, dtype=float), (spec.n, 1))).sum(axis=0)


def global_minimizer(spec, tol=1e-10, x_init=None, max_iters=500):
    """Centralized minimizer x* with ||grad F(x*)|| <= tol.

    Quadratics are solved in closed form; logistic via damped Newton.
    Raises RuntimeError if the iteration cap is hit before reaching tol.
    """
    if spec.kind == "quadratic":
        h = spec.quad_mats.sum(axis=0)
        rhs = np.einsum("ijk,ik->j", spec.quad_mats, spec.quad_offsets)
        x = np.linalg.solve(h, rhs)
        if np.linalg.norm(global_gradient(spec, x)) > max(tol, 1e-9):
            raise RuntimeError("closed-form quadratic solve missed tolerance")
        return x

    x = np.zeros(spec.m) if x_init is None else np.asarray(x_init, dtype=float).copy()
    for _ in range(max_iters):
        g = global_gradient(spec, x)
        gnorm = np.linalg.norm(g)
        if gnorm <= tol:
            return x
        margins = np.einsum("idm,im->id", spec.features, np.tile(x, (spec.n, 1)))
        s = expit(-spec.labels * margins)
        curv = s * (1.0 - s)
        hess = spec.reg * np.eye(spec.m) + np.einsum(
            "id,idm,idk->mk", curv, spec.features, spec.features)
        step = np.linalg.solve(hess, g)
        # accept the largest halved step that does not increase the value
        # beyond float noise; near the optimum the full Newton step always passes
        val = global_value(spec, x)
        t = 1.0
        while t > 1e-4 and global_value(spec, x - t * step) > val + 1e-12 * (1.0 + abs(val)):
            t *= 0.5
        x = x - t * step
    raise RuntimeError(f"minimizer did not reach tol={tol} in {max_iters} iterations")


def save_objective(spec, path):
    """Serialize a spec to .npz so experiments replay bit-exactly."""
    if spec.kind == "logistic":
        np.savez(path, kind="logistic", n=spec.n, m=spec.m, reg=spec.reg,
                 features=spec.features, labels=spec.labels)
    else:
        np.savez(path, kind="quadratic", n=spec.n, m=spec.m,
                 quad_mats=spec.quad_mats, quad_offsets=spec.quad_offsets)


def load_objective(path):
    with np.load(path, allow_pickle=False) as d:
        kind = str(d["kind"])
        if kind == "logistic":
            return ObjectiveSpec(n=int(d["n"]), m=int(d["m"]), kind=kind,
                                 features=d["features"], labels=d["labels"],
                                 reg=float(d["reg"]))
        return ObjectiveSpec(n=int(d["n"]), m=int(d["m"]), kind=kind,
                             quad_mats=d["quad_mats"], quad_offsets=d["quad_offsets"])
