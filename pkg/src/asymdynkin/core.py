"""Finite-tree machinery for randomized-stopping games.

Time grids, filtration trees, generating processes (the conditional CDFs of
randomized stopping times), counter-based randomization devices, and exact /
Monte Carlo evaluation of the first-to-stop payoff

    P(tau, sigma) = f_tau 1{tau<sigma} + h_tau 1{tau=sigma} + g_sigma 1{sigma<tau}.

Everything is node-indexed: a per-node array is automatically adapted because
a node *is* its own history.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

__all__ = [
    "TimeGrid",
    "FiltrationTree",
    "RandomDevice",
    "GeneratingProcess",
    "StoppingRule",
    "PayoffTriple",
    "ValidationReport",
    "ShapeMismatchError",
    "IndexOutOfRangeError",
    "single_path_tree",
    "binary_tree",
    "validate_generating",
    "sample_stopping_time",
    "truncate_control",
    "realized_payoff",
    "expected_payoff_exact",
    "expected_payoff_mc",
]

MONOTONE_TOL = 1e-12  # absolute slack for prefix-sum rounding


class ShapeMismatchError(ValueError):
    """Node count of a per-node array disagrees with the tree."""


class IndexOutOfRangeError(IndexError):
    """A stopping index lies outside the path's grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times t_0 = 0 < t_1 < ... < t_N = horizon."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid times must be strictly increasing")

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @staticmethod
    def regular(n_steps: int, horizon: float = 1.0) -> "TimeGrid":
        return TimeGrid(np.linspace(0.0, horizon, n_steps + 1))


@dataclass(frozen=True)
class FiltrationTree:
    """Finite filtration tree; node ids are topological (parents first).

    ``parent[i]`` is -1 for the root, ``prob[i]`` the transition probability
    from the parent (1.0 at the root).  All leaves sit at the final depth.
    """

    parent: np.ndarray
    prob: np.ndarray
    grid: TimeGrid | None = None

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        prob = np.asarray(self.prob, dtype=float)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "prob", prob)
        if parent.shape != prob.shape or parent.ndim != 1:
            raise ValueError("parent/prob must be 1-d arrays of equal length")
        if parent[0] != -1 or np.any(parent[1:] < 0) or np.any(parent[1:] >= np.arange(1, parent.size)):
            raise ValueError("node ids must be topological with a single root at 0")

    @property
    def n_nodes(self) -> int:
        return self.parent.size

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(1, self.n_nodes):
            d[i] = d[self.parent[i]] + 1
        return d

    @property
    def n_steps(self) -> int:
        return int(self.depth.max())

    @cached_property
    def children(self) -> list[np.ndarray]:
        buckets: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i in range(1, self.n_nodes):
            buckets[self.parent[i]].append(i)
        return [np.asarray(b, dtype=np.int64) for b in buckets]

    @cached_property
    def is_leaf(self) -> np.ndarray:
        return np.asarray([c.size == 0 for c in self.children])

    @cached_property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.is_leaf)

    @cached_property
    def reach(self) -> np.ndarray:
        """Probability of reaching each node from the root."""
        r = np.ones(self.n_nodes)
        for i in range(1, self.n_nodes):
            r[i] = r[self.parent[i]] * self.prob[i]
        return r

    @cached_property
    def paths(self) -> np.ndarray:
        """(n_leaves, n_steps+1) node ids along each root-to-leaf path."""
        n = self.n_steps + 1
        out = np.empty((self.leaves.size, n), dtype=np.int64)
        for row, leaf in enumerate(self.leaves):
            node = leaf
            for k in range(n - 1, -1, -1):
                out[row, k] = node
                node = self.parent[node]
        return out

    def path_of_leaf(self, leaf: int) -> np.ndarray:
        row = int(np.searchsorted(self.leaves, leaf))
        return self.paths[row]

    def validate(self, tol: float = MONOTONE_TOL) -> None:
        """Raise ValueError on any structural violation."""
        depth = self.depth
        n_steps = self.n_steps
        for i, kids in enumerate(self.children):
            if kids.size:
                s = self.prob[kids].sum()
                if abs(s - 1.0) > tol:
                    raise ValueError(f"children probabilities of node {i} sum to {s!r}")
            elif depth[i] != n_steps:
                raise ValueError(f"leaf {i} at depth {depth[i]} != {n_steps}")
        if np.any(self.prob < -tol):
            raise ValueError("negative transition probability")
        if self.grid is not None and self.grid.n_steps != n_steps:
            raise ShapeMismatchError("grid step count disagrees with tree depth")

    def check_nodes(self, arr: np.ndarray, name: str = "array") -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.shape[-1] != self.n_nodes:
            raise ShapeMismatchError(
                f"{name} has {arr.shape[-1]} entries for a tree with {self.n_nodes} nodes"
            )
        return arr

    def expectation_step(self, values: np.ndarray) -> np.ndarray:
        """One-step conditional expectation E[X_child | node] at internal nodes."""
        out = np.zeros(self.n_nodes)
        for i, kids in enumerate(self.children):
            if kids.size:
                out[i] = float(np.dot(self.prob[kids], values[kids]))
        return out

    def accumulate_before(self, increments: np.ndarray) -> np.ndarray:
        """Per node n: sum of ``increments`` over strict ancestors of n."""
        out = np.zeros(self.n_nodes)
        for i in range(1, self.n_nodes):
            p = self.parent[i]
            out[i] = out[p] + increments[p]
        return out


def single_path_tree(n_steps: int, grid: TimeGrid | None = None) -> FiltrationTree:
    """Deterministic filtration: one node per grid time."""
    parent = np.arange(-1, n_steps)
    prob = np.ones(n_steps + 1)
    return FiltrationTree(parent, prob, grid or TimeGrid.regular(n_steps))


def binary_tree(n_steps: int, p_up: float = 0.5, grid: TimeGrid | None = None) -> FiltrationTree:
    """Full binary tree of the given depth with branch probability ``p_up``."""
    parent = [-1]
    prob = [1.0]
    level = [0]
    for _ in range(n_steps):
        nxt = []
        for node in level:
            for pr in (p_up, 1.0 - p_up):
                parent.append(node)
                prob.append(pr)
                nxt.append(len(parent) - 1)
        level = nxt
    return FiltrationTree(np.asarray(parent), np.asarray(prob), grid or TimeGrid.regular(n_steps))


@dataclass(frozen=True)
class RandomDevice:
    """Counter-based uniform generator keyed by (seed, stream).

    Identical (seed, stream) pairs reproduce identical draws; distinct
    streams are independent, so each player's randomization device and the
    path sampler get their own stream.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, n: int) -> np.ndarray:
        return self.generator().random(n)

    def with_stream(self, stream: int) -> "RandomDevice":
        return replace(self, stream=stream)


@dataclass(frozen=True)
class GeneratingProcess:
    """Non-decreasing node-indexed process with terminal value 1.

    ``levels[n]`` is the CDF level at node n, ``steps[n]`` the increment over
    the parent (over 0 at the root).  Increments are stored alongside levels
    to avoid cancellation; levels are recomputed as prefix sums only for
    validation.
    """

    levels: np.ndarray
    steps: np.ndarray

    @staticmethod
    def from_levels(levels: np.ndarray, tree: FiltrationTree) -> "GeneratingProcess":
        levels = tree.check_nodes(levels, "levels").copy()
        steps = levels.copy()
        steps[1:] -= levels[tree.parent[1:]]
        return GeneratingProcess(levels, steps)

    @staticmethod
    def from_steps(steps: np.ndarray, tree: FiltrationTree) -> "GeneratingProcess":
        steps = tree.check_nodes(steps, "steps").copy()
        levels = steps.copy()
        for i in range(1, levels.size):
            levels[i] = levels[tree.parent[i]] + steps[i]
        return GeneratingProcess(levels, steps)

    @staticmethod
    def jump_at_depth(k: int, tree: FiltrationTree) -> "GeneratingProcess":
        """Pure process jumping to 1 at grid time k on every path."""
        return GeneratingProcess.from_levels((tree.depth >= k).astype(float), tree)

    def pre_levels(self, tree: FiltrationTree) -> np.ndarray:
        """Left limits: the level strictly before each node (0 at the root)."""
        pre = np.zeros(tree.n_nodes)
        pre[1:] = self.levels[tree.parent[1:]]
        return pre

    @property
    def n_nodes(self) -> int:
        return self.levels.size


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_generating(
    proc: GeneratingProcess, tree: FiltrationTree, tol: float = MONOTONE_TOL
) -> ValidationReport:
    """Check a generating process against Def-2.2-style invariants.

    Returns a report listing violations tagged ``ShapeMismatch``,
    ``NotMonotone`` or ``TerminalNotOne``; an empty list means OK.
    """
    violations: list[str] = []
    if proc.levels.shape != (tree.n_nodes,) or proc.steps.shape != (tree.n_nodes,):
        return ValidationReport(False, (f"ShapeMismatch: {proc.levels.shape[0]} values for {tree.n_nodes} nodes",))
    bad = np.flatnonzero(proc.steps < -tol)
    for i in bad:
        violations.append(f"NotMonotone: negative increment {proc.steps[i]!r} at node {i}")
    # recompute levels as prefix sums and compare
    drift = proc.levels - GeneratingProcess.from_steps(proc.steps, tree).levels
    if np.max(np.abs(drift)) > 1e-9:
        violations.append("NotMonotone: levels are not the prefix sums of the increments")
    for leaf in tree.leaves:
        if abs(proc.levels[leaf] - 1.0) > 1e-9:
            violations.append(f"TerminalNotOne: level {proc.levels[leaf]!r} at leaf {leaf}")
    return ValidationReport(not violations, tuple(violations))


def sample_stopping_time(proc: GeneratingProcess, path: np.ndarray, z: float) -> int:
    """First grid index k along ``path`` with level strictly above z."""
    levels = proc.levels[np.asarray(path)]
    return int(np.sum(levels <= z))


@dataclass(frozen=True)
class StoppingRule:
    """Pure adapted stopping rule: a stop/continue flag per node.

    Exactly one stop along every root-to-leaf path; nodes strictly below a
    stop node are unreachable and their flag is ignored.
    """

    stops: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stops", np.asarray(self.stops, dtype=bool))

    @staticmethod
    def at_depth(k: int, tree: FiltrationTree) -> "StoppingRule":
        return StoppingRule(tree.depth == k)

    def stopped_by(self, tree: FiltrationTree) -> np.ndarray:
        """Indicator per node: the path to it (inclusive) contains a stop."""
        hit = self.stops.astype(float).copy()
        for i in range(1, tree.n_nodes):
            if hit[tree.parent[i]]:
                hit[i] = 1.0
        return hit

    def stop_ancestor(self, tree: FiltrationTree) -> np.ndarray:
        """Id of the stop node on the path to each node, or -1 if none yet."""
        anc = np.full(tree.n_nodes, -1, dtype=np.int64)
        if self.stops[0]:
            anc[0] = 0
        for i in range(1, tree.n_nodes):
            p = anc[tree.parent[i]]
            anc[i] = p if p >= 0 else (i if self.stops[i] else -1)
        return anc

    def to_generating(self, tree: FiltrationTree) -> GeneratingProcess:
        return GeneratingProcess.from_levels(self.stopped_by(tree), tree)

    def validate(self, tree: FiltrationTree) -> None:
        hit = self.stopped_by(tree)
        if np.any(hit[tree.leaves] != 1.0):
            raise ValueError("rule fails to stop on some path")


def truncate_control(
    proc: GeneratingProcess, rule: StoppingRule, tree: FiltrationTree
) -> GeneratingProcess:
    """Restart ``proc`` from zero at the adapted time given by ``rule``.

    Implements (rho_t - rho_{eta-}) / (1 - rho_{eta-}) on {t >= eta}, zero
    before, with the 0/0 = 1 convention when the pre-level is already 1.
    """
    anc = rule.stop_ancestor(tree)
    levels = np.zeros(tree.n_nodes)
    for n in range(tree.n_nodes):
        a = anc[n]
        if a < 0:
            continue
        pre = proc.levels[tree.parent[a]] if a > 0 else 0.0
        if 1.0 - pre <= 0.0:
            levels[n] = 1.0
        else:
            levels[n] = (proc.levels[n] - pre) / (1.0 - pre)
    return GeneratingProcess.from_levels(levels, tree)


@dataclass(frozen=True)
class PayoffTriple:
    """Payoff processes with f >= h >= g at every node (and regime)."""

    f: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("f", "g", "h"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def per_regime(self) -> bool:
        return self.f.ndim == 2

    def regime(self, i: int) -> "PayoffTriple":
        if not self.per_regime:
            raise ValueError("payoffs are not regime-indexed")
        return PayoffTriple(self.f[i], self.g[i], self.h[i])

    def validate(self, tree: FiltrationTree) -> None:
        for name in ("f", "g", "h"):
            arr = getattr(self, name)
            if arr.shape[-1] != tree.n_nodes:
                raise ShapeMismatchError(f"payoff {name} has wrong node count")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"payoff {name} contains non-finite values")
        if np.any(self.f < self.h - 1e-12) or np.any(self.h < self.g - 1e-12):
            raise ValueError("ordering f >= h >= g violated")


def realized_payoff(payoffs: PayoffTriple, path: np.ndarray, tau: int, sigma: int) -> float:
    """P(tau, sigma) along one path, for single-regime payoff arrays."""
    path = np.asarray(path)
    if not (0 <= tau < path.size and 0 <= sigma < path.size):
        raise IndexOutOfRangeError(f"stop index out of range: tau={tau}, sigma={sigma}")
    if tau < sigma:
        return float(payoffs.f[path[tau]])
    if tau == sigma:
        return float(payoffs.h[path[tau]])
    return float(payoffs.g[path[sigma]])


def _exact_single(
    tree: FiltrationTree,
    f: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    xi: GeneratingProcess,
    zeta: GeneratingProcess,
) -> float:
    # discrete Lebesgue-Stieltjes form: the f and g terms die at leaves since
    # both levels are 1 there, leaving the h-tie term
    tree.check_nodes(xi.levels, "xi")
    tree.check_nodes(zeta.levels, "zeta")
    integrand = (
        f * (1.0 - zeta.levels) * xi.steps
        + g * (1.0 - xi.levels) * zeta.steps
        + h * xi.steps * zeta.steps
    )
    return float(np.dot(tree.reach, integrand))


def expected_payoff_exact(
    tree: FiltrationTree,
    payoffs: PayoffTriple,
    xi,
    zeta: GeneratingProcess,
    prior: float | None = None,
) -> float:
    """Exact expected payoff of a randomized profile.

    For regime games pass ``xi`` as a pair (xi0, xi1) of informed incarnations
    together with the prior P(J = 1); the expectation then averages the
    per-regime values with weights (1 - prior, prior).
    """
    if payoffs.per_regime:
        if prior is None:
            raise ValueError("regime payoffs need a prior")
        xi0, xi1 = xi
        v0 = _exact_single(tree, payoffs.f[0], payoffs.g[0], payoffs.h[0], xi0, zeta)
        v1 = _exact_single(tree, payoffs.f[1], payoffs.g[1], payoffs.h[1], xi1, zeta)
        return (1.0 - prior) * v0 + prior * v1
    return _exact_single(tree, payoffs.f, payoffs.g, payoffs.h, xi, zeta)


def sample_paths(tree: FiltrationTree, n: int, rng: np.random.Generator) -> np.ndarray:
    """Row indices into ``tree.paths`` for n independently sampled scenarios."""
    current = np.zeros(n, dtype=np.int64)
    for _ in range(tree.n_steps):
        u = rng.random(n)
        nxt = np.empty_like(current)
        for node in np.unique(current):
            kids = tree.children[node]
            cum = np.cumsum(tree.prob[kids])
            sel = current == node
            nxt[sel] = kids[np.searchsorted(cum, u[sel], side="right").clip(max=kids.size - 1)]
        current = nxt
    return np.searchsorted(tree.leaves, current)


def expected_payoff_mc(
    tree: FiltrationTree,
    payoffs: PayoffTriple,
    xi,
    zeta: GeneratingProcess,
    n: int,
    device: RandomDevice,
    prior: float | None = None,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the realized payoff.

    Draws (path, Z1, Z2) -- and the regime when applicable -- from distinct
    device streams, so the estimate is deterministic given the seed.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng_path = device.generator()
    z1 = device.with_stream(device.stream + 1).uniforms(n)
    z2 = device.with_stream(device.stream + 2).uniforms(n)
    rows = sample_paths(tree, n, rng_path)
    paths = tree.paths[rows]

    if payoffs.per_regime:
        if prior is None:
            raise ValueError("regime payoffs need a prior")
        regime = (device.with_stream(device.stream + 3).uniforms(n) < prior).astype(np.int64)
        xi0, xi1 = xi
        xi_levels = np.where(regime[:, None].astype(bool), xi1.levels[paths], xi0.levels[paths])
        f = np.take_along_axis(payoffs.f[regime], paths, axis=1)
        g = np.take_along_axis(payoffs.g[regime], paths, axis=1)
        h = np.take_along_axis(payoffs.h[regime], paths, axis=1)
    else:
        xi_levels = xi.levels[paths]
        f, g, h = payoffs.f[paths], payoffs.g[paths], payoffs.h[paths]

    zeta_levels = zeta.levels[paths]
    tau = np.sum(xi_levels <= z1[:, None], axis=1)
    sigma = np.sum(zeta_levels <= z2[:, None], axis=1)
    k = np.minimum(tau, sigma)
    idx = np.arange(n)
    vals = np.where(
        tau < sigma, f[idx, k], np.where(tau == sigma, h[idx, k], g[idx, k])
    )
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return est, stderr
