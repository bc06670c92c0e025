"""Binary-regime stopping games where one player observes the regime.

The informed player (minimizer) has two incarnations, one per regime value;
the uninformed player (maximizer) holds a belief about the regime that is
updated from the opponent's inaction.  This module computes best-response
value surfaces by exact backward recursion and produces node-by-node
martingale, support and consistency reports together with two independent
saddle-point certifiers.

Value surfaces are kept in un-normalized "hat" form (weighted by the
opponent's survival); normalization by survival divides them out with the
0/0 = 1 convention, so exhausted branches never see a division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FiltrationTree,
    GeneratingProcess,
    PayoffTriple,
    ShapeMismatchError,
    validate_generating,
)

__all__ = [
    "ScenarioGame",
    "StrategyProfile",
    "ValueSurfaces",
    "MartingaleReport",
    "SupportReport",
    "Certificate",
    "belief_update",
    "best_response_values",
    "martingale_report",
    "support_report",
    "ex_ante_check",
    "certify_mart",
    "certify_stop",
]

DEFAULT_TOL = 1e-8
_SURVIVAL_FLOOR = 1e-15  # below this a survival weight counts as exhausted


@dataclass(frozen=True)
class ScenarioGame:
    """Finite tree + per-regime payoff triples + prior P(regime = 1)."""

    tree: FiltrationTree
    payoffs: PayoffTriple
    prior: float

    def __post_init__(self):
        if not self.payoffs.per_regime:
            raise ValueError("scenario games need regime-indexed payoffs (2, n_nodes)")
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError("prior must lie in [0, 1]")

    def validate(self) -> None:
        self.tree.validate()
        self.payoffs.validate(self.tree)

    @property
    def weights(self) -> np.ndarray:
        return np.array([1.0 - self.prior, self.prior])


@dataclass(frozen=True)
class StrategyProfile:
    """Informed incarnations (xi0, xi1) and the uninformed process zeta."""

    xi0: GeneratingProcess
    xi1: GeneratingProcess
    zeta: GeneratingProcess

    def xi(self, i: int) -> GeneratingProcess:
        return self.xi1 if i else self.xi0

    def validate(self, tree: FiltrationTree) -> None:
        for name in ("xi0", "xi1", "zeta"):
            rep = validate_generating(getattr(self, name), tree)
            if not rep:
                raise ValueError(f"{name}: " + "; ".join(rep.violations))


def belief_update(prior: float, xi0_pre, xi1_pre):
    """Posterior P(regime=1 | no informed stop yet), with survivals 1-xi_pre.

    Returns (p, degenerate): where both survival weights vanish the belief is
    reported as the prior with the degenerate flag set.
    """
    s0 = (1.0 - prior) * (1.0 - np.asarray(xi0_pre, dtype=float))
    s1 = prior * (1.0 - np.asarray(xi1_pre, dtype=float))
    den = s0 + s1
    degenerate = den <= _SURVIVAL_FLOOR
    p = np.where(degenerate, prior, s1 / np.where(degenerate, 1.0, den))
    if p.ndim == 0:
        return float(p), bool(degenerate)
    return p, degenerate


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    dead = den <= _SURVIVAL_FLOOR
    return np.where(dead, 1.0, num / np.where(dead, 1.0, den))


@dataclass(frozen=True)
class ValueSurfaces:
    """Per-node best-response values of both players against a profile.

    ``u_hat[i]`` is the regime-i informed value weighted by the opponent's
    survival (1 - zeta_pre); ``v_hat`` the uninformed value weighted by the
    prior-averaged informed survival.  ``u``/``v`` are the normalized
    versions, ``p`` the belief path, and the ``*_stops`` masks record the
    strict-preference stopping decisions of the recursion (ties continue).
    """

    u_hat: np.ndarray
    v_hat: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    degenerate: np.ndarray
    informed_stops: np.ndarray
    uninformed_stops: np.ndarray

    @property
    def value(self) -> float:
        """Root value of the uninformed player's problem."""
        return float(self.v_hat[0])

    def root_values(self) -> tuple[np.ndarray, float]:
        return self.u_hat[:, 0].copy(), float(self.v_hat[0])


def _stop_bounds(game: ScenarioGame, profile: StrategyProfile):
    """Immediate-stop values: per-incarnation and belief-averaged."""
    pay, w = game.payoffs, game.weights
    zl, zs = profile.zeta.levels, profile.zeta.steps
    stop_u = np.stack(
        [pay.f[i] * (1.0 - zl) + pay.h[i] * zs for i in range(2)]
    )
    stop_v = sum(
        w[i] * (pay.g[i] * (1.0 - profile.xi(i).levels) + pay.h[i] * profile.xi(i).steps)
        for i in range(2)
    )
    return stop_u, stop_v


def best_response_values(game: ScenarioGame, profile: StrategyProfile) -> ValueSurfaces:
    """Backward recursion for both players' best responses to ``profile``.

    Informed incarnation i (zeta fixed): at a leaf the remaining value is
    h_i * dzeta; inside, min(stop, g_i * dzeta + E[next]).  Uninformed
    (xi0, xi1 fixed): max of the prior-averaged stop bound against
    sum_i pi_i f_i dxi_i + E[next].  Ties prefer continuation.
    """
    tree, pay, w = game.tree, game.payoffs, game.weights
    n = tree.n_nodes
    if profile.zeta.n_nodes != n or profile.xi0.n_nodes != n or profile.xi1.n_nodes != n:
        raise ShapeMismatchError("profile node count disagrees with game tree")

    zs = profile.zeta.steps
    stop_u, stop_v = _stop_bounds(game, profile)
    cont_u_flow = np.stack([pay.g[i] * zs for i in range(2)])
    cont_v_flow = sum(w[i] * pay.f[i] * profile.xi(i).steps for i in range(2))

    u_hat = np.zeros((2, n))
    v_hat = np.zeros(n)
    informed_stops = np.zeros((2, n), dtype=bool)
    uninformed_stops = np.zeros(n, dtype=bool)

    for node in range(n - 1, -1, -1):
        kids = tree.children[node]
        if kids.size == 0:
            u_hat[:, node] = pay.h[:, node] * zs[node]
            v_hat[node] = stop_v[node]
            continue
        pk = tree.prob[kids]
        for i in range(2):
            cont = cont_u_flow[i, node] + float(np.dot(pk, u_hat[i, kids]))
            stop = stop_u[i, node]
            informed_stops[i, node] = stop < cont
            u_hat[i, node] = min(stop, cont)
        cont_v = cont_v_flow[node] + float(np.dot(pk, v_hat[kids]))
        uninformed_stops[node] = stop_v[node] > cont_v
        v_hat[node] = max(stop_v[node], cont_v)

    zeta_pre = profile.zeta.pre_levels(tree)
    xi_pre = np.stack([profile.xi(i).pre_levels(tree) for i in range(2)])
    surv_v = w[0] * (1.0 - xi_pre[0]) + w[1] * (1.0 - xi_pre[1])
    u = np.stack([_safe_ratio(u_hat[i], 1.0 - zeta_pre) for i in range(2)])
    v = _safe_ratio(v_hat, surv_v)
    p, degenerate = belief_update(game.prior, xi_pre[0], xi_pre[1])
    return ValueSurfaces(u_hat, v_hat, u, v, p, degenerate, informed_stops, uninformed_stops)


def _drift(tree: FiltrationTree, values: np.ndarray) -> np.ndarray:
    """One-step conditional drift at internal nodes (0 at leaves)."""
    d = tree.expectation_step(values) - values
    d[tree.is_leaf] = 0.0
    return d


@dataclass(frozen=True)
class MartingaleReport:
    """Exact one-step drifts of the auxiliary value systems.

    ``m0_drift[i]`` is the drift of sum_{s<t} g_i dzeta + u_hat_i (should be
    a submartingale, and a martingale wherever incarnation i still survives);
    ``n0_drift`` the analogous supermartingale drift on the uninformed side.
    Override drifts check an arbitrary candidate strategy against the same
    equilibrium surfaces.
    """

    m0_drift: np.ndarray
    n0_drift: np.ndarray
    internal: np.ndarray
    xi_active: np.ndarray
    zeta_active: np.ndarray
    tol: float
    m_override_drift: np.ndarray | None = None
    n_override_drift: np.ndarray | None = None

    @property
    def m0_submartingale(self) -> np.ndarray:
        return np.array([self.m0_drift[i][self.internal].min(initial=0.0) >= -self.tol for i in range(2)])

    @property
    def m0_martingale_on_active(self) -> np.ndarray:
        out = []
        for i in range(2):
            mask = self.internal & self.xi_active[i]
            out.append(np.abs(self.m0_drift[i][mask]).max(initial=0.0) <= self.tol)
        return np.array(out)

    @property
    def n0_supermartingale(self) -> bool:
        return bool(self.n0_drift[self.internal].max(initial=0.0) <= self.tol)

    @property
    def n0_martingale_on_active(self) -> bool:
        mask = self.internal & self.zeta_active
        return bool(np.abs(self.n0_drift[mask]).max(initial=0.0) <= self.tol)

    def node_classification(self, drift: np.ndarray) -> list[str]:
        """Per-node label for a drift array: martingale / sub / super / leaf."""
        out = []
        for node, d in enumerate(drift):
            if not self.internal[node]:
                out.append("leaf")
            elif abs(d) <= self.tol:
                out.append("martingale")
            elif d > self.tol:
                out.append("submartingale")
            else:
                out.append("supermartingale")
        return out

    @property
    def override_ok(self) -> bool:
        ok = True
        if self.m_override_drift is not None:
            ok &= bool(self.m_override_drift[:, self.internal].min(initial=0.0) >= -self.tol)
        if self.n_override_drift is not None:
            ok &= bool(self.n_override_drift[self.internal].max(initial=0.0) <= self.tol)
        return ok

    @property
    def ok(self) -> bool:
        return (
            bool(self.m0_submartingale.all())
            and bool(self.m0_martingale_on_active.all())
            and self.n0_supermartingale
            and self.n0_martingale_on_active
            and self.override_ok
        )


def _m_drift_for_xi(game, profile, surfaces, xi_pair) -> np.ndarray:
    """Drift of the informed-side system for an arbitrary strategy pair."""
    tree, pay = game.tree, game.payoffs
    zl, zs = profile.zeta.levels, profile.zeta.steps
    out = np.zeros((2, tree.n_nodes))
    for i in range(2):
        xi = xi_pair[i]
        inc = ((1.0 - zl) * pay.f[i] + pay.h[i] * zs) * xi.steps + (1.0 - xi.levels) * pay.g[i] * zs
        acc = tree.accumulate_before(inc)
        m = acc + (1.0 - xi.pre_levels(tree)) * surfaces.u_hat[i]
        out[i] = _drift(tree, m)
    return out


def _n_drift_for_zeta(game, profile, surfaces, zeta) -> np.ndarray:
    tree, pay, w = game.tree, game.payoffs, game.weights
    zl, zs = zeta.levels, zeta.steps
    inc = sum(
        w[i]
        * (
            ((1.0 - zl) * pay.f[i] + pay.h[i] * zs) * profile.xi(i).steps
            + (1.0 - profile.xi(i).levels) * pay.g[i] * zs
        )
        for i in range(2)
    )
    acc = tree.accumulate_before(inc)
    n = acc + (1.0 - zeta.pre_levels(tree)) * surfaces.v_hat
    return _drift(tree, n)


def martingale_report(
    game: ScenarioGame,
    profile: StrategyProfile,
    surfaces: ValueSurfaces,
    xi_override: tuple[GeneratingProcess, GeneratingProcess] | None = None,
    zeta_override: GeneratingProcess | None = None,
    tol: float = DEFAULT_TOL,
) -> MartingaleReport:
    """Exact drift classification of the M/N systems at every node."""
    tree, pay, w = game.tree, game.payoffs, game.weights
    zs = profile.zeta.steps

    g_acc = np.stack([tree.accumulate_before(pay.g[i] * zs) for i in range(2)])
    m0 = g_acc + surfaces.u_hat
    f_acc = tree.accumulate_before(
        sum(w[i] * pay.f[i] * profile.xi(i).steps for i in range(2))
    )
    n0 = f_acc + surfaces.v_hat

    m0_drift = np.stack([_drift(tree, m0[i]) for i in range(2)])
    n0_drift = _drift(tree, n0)

    m_over = None
    if xi_override is not None:
        m_over = _m_drift_for_xi(game, profile, surfaces, xi_override)
    n_over = None
    if zeta_override is not None:
        n_over = _n_drift_for_zeta(game, profile, surfaces, zeta_override)

    return MartingaleReport(
        m0_drift=m0_drift,
        n0_drift=n0_drift,
        internal=~tree.is_leaf,
        xi_active=np.stack([profile.xi(i).levels < 1.0 - 1e-12 for i in range(2)]),
        zeta_active=profile.zeta.levels < 1.0 - 1e-12,
        tol=tol,
        m_override_drift=m_over,
        n_override_drift=n_over,
    )


@dataclass(frozen=True)
class SupportReport:
    """Support slacks and flat-off residuals of a profile at its surfaces.

    ``z[i] = u_hat_i - informed stop bound`` (non-positive at equilibrium),
    ``y2 = v_hat - uninformed stop bound`` (non-negative); the flat-off sums
    accumulate slack x stopping mass along each root-to-leaf path and vanish
    exactly when mass sits only where the slack is zero.  ``consistency`` is
    |<p, U> - V| on the still-in-play set Gamma2.
    """

    z: np.ndarray
    y2: np.ndarray
    flat_off_informed: np.ndarray
    flat_off_uninformed: np.ndarray
    consistency: np.ndarray
    gamma2: np.ndarray
    simultaneous_jumps: np.ndarray

    @property
    def max_z(self) -> float:
        return float(self.z.max())

    @property
    def min_y2(self) -> float:
        return float(self.y2.min())

    @property
    def max_flat_off(self) -> float:
        return max(
            float(np.abs(self.flat_off_informed).max(initial=0.0)),
            float(np.abs(self.flat_off_uninformed).max(initial=0.0)),
        )

    @property
    def max_consistency(self) -> float:
        vals = self.consistency[self.gamma2]
        return float(vals.max(initial=0.0))


def support_report(
    game: ScenarioGame, profile: StrategyProfile, surfaces: ValueSurfaces
) -> SupportReport:
    tree = game.tree
    stop_u, stop_v = _stop_bounds(game, profile)
    z = surfaces.u_hat - stop_u
    y2 = surfaces.v_hat - stop_v

    contrib_inf = z[0] * profile.xi0.steps + z[1] * profile.xi1.steps
    contrib_uni = y2 * profile.zeta.steps
    flat_inf = contrib_inf[tree.paths].sum(axis=1)
    flat_uni = contrib_uni[tree.paths].sum(axis=1)

    xi_pre = np.stack([profile.xi(i).pre_levels(tree) for i in range(2)])
    zeta_pre = profile.zeta.pre_levels(tree)
    gamma2 = (np.minimum(xi_pre[0], xi_pre[1]) < 1.0 - 1e-12) & (zeta_pre < 1.0 - 1e-12)
    consistency = np.abs(
        surfaces.p * surfaces.u[1] + (1.0 - surfaces.p) * surfaces.u[0] - surfaces.v
    )

    interior = ~tree.is_leaf
    simt = interior & (profile.zeta.steps > 1e-12) & (
        (profile.xi0.steps > 1e-12) | (profile.xi1.steps > 1e-12)
    )
    return SupportReport(z, y2, flat_inf, flat_uni, consistency, gamma2, np.flatnonzero(simt))


def ex_ante_check(
    game: ScenarioGame, profile: StrategyProfile, surfaces: ValueSurfaces, node: int = 0
) -> float:
    """|remaining-payoff expectation - survival x value| at a tree node.

    The left side sums the profile's payoff flow over the subtree of ``node``
    exactly; the right side is the opponent-survival weight times the
    uninformed value surface.  The two agree (to rounding) at equilibrium;
    at the root the check reduces to |E[P(xi, zeta)] - v_hat(root)|.
    """
    tree, pay, w = game.tree, game.payoffs, game.weights
    rel = np.zeros(tree.n_nodes)
    rel[node] = 1.0
    for m in range(node + 1, tree.n_nodes):
        par = tree.parent[m]
        if rel[par] > 0.0:
            rel[m] = rel[par] * tree.prob[m]
    zl, zs = profile.zeta.levels, profile.zeta.steps
    flow = sum(
        w[i]
        * (
            pay.f[i] * (1.0 - zl) * profile.xi(i).steps
            + pay.g[i] * (1.0 - profile.xi(i).levels) * zs
            + pay.h[i] * profile.xi(i).steps * zs
        )
        for i in range(2)
    )
    lhs = float(np.dot(rel, flow))
    rhs = float((1.0 - profile.zeta.pre_levels(tree)[node]) * surfaces.v_hat[node])
    return abs(lhs - rhs)


@dataclass(frozen=True)
class Certificate:
    """Outcome of a saddle-point certification."""

    certified: bool
    value: float
    violations: tuple[tuple[str, int, float], ...]
    tol: float

    @property
    def verdict(self) -> str:
        return "certified" if self.certified else "rejected"


def certify_mart(
    game: ScenarioGame,
    profile: StrategyProfile,
    surfaces: ValueSurfaces,
    tol: float = DEFAULT_TOL,
) -> Certificate:
    """Martingale-route sufficiency check of a candidate (profile, surfaces).

    Conditions: (i) informed systems are submartingales, (ii) the uninformed
    system is a supermartingale, (iii)/(iv) the normalized surfaces respect
    the stop bounds wherever the respective survival is positive, and (v) the
    root values match across players.  Certified implies value = V at root.
    """
    tree, pay, w = game.tree, game.payoffs, game.weights
    report = martingale_report(game, profile, surfaces, tol=tol)
    violations: list[tuple[str, int, float]] = []
    internal = np.flatnonzero(report.internal)

    for i in range(2):
        for node in internal:
            d = report.m0_drift[i][node]
            if d < -tol:
                violations.append((f"(i) M0[{i}] submartingale", int(node), float(d)))
    for node in internal:
        d = report.n0_drift[node]
        if d > tol:
            violations.append(("(ii) N0 supermartingale", int(node), float(d)))

    zeta_pre = profile.zeta.pre_levels(tree)
    stop_u, stop_v = _stop_bounds(game, profile)
    alive_u = zeta_pre < 1.0 - 1e-12
    for i in range(2):
        resid = (surfaces.u_hat[i] - stop_u[i]) / np.maximum(1.0 - zeta_pre, _SURVIVAL_FLOOR)
        for node in np.flatnonzero(alive_u & (resid > tol)):
            violations.append((f"(iii) obstacle U[{i}]", int(node), float(resid[node])))

    xi_pre = np.stack([profile.xi(i).pre_levels(tree) for i in range(2)])
    surv_v = w[0] * (1.0 - xi_pre[0]) + w[1] * (1.0 - xi_pre[1])
    alive_v = surv_v > _SURVIVAL_FLOOR
    resid_v = (stop_v - surfaces.v_hat) / np.maximum(surv_v, _SURVIVAL_FLOOR)
    for node in np.flatnonzero(alive_v & (resid_v > tol)):
        violations.append(("(iv) obstacle V", int(node), float(resid_v[node])))

    u0, v0 = surfaces.root_values()
    gap = abs(w[0] * u0[0] + w[1] * u0[1] - v0)
    if gap > tol:
        violations.append(("(v) root values", 0, float(gap)))

    return Certificate(not violations, float(v0), tuple(violations), tol)


def certify_stop(
    game: ScenarioGame,
    profile: StrategyProfile,
    u_root: np.ndarray | None = None,
    v_root: float | None = None,
    cap: int = 20_000,
    tol: float = DEFAULT_TOL,
    surfaces: ValueSurfaces | None = None,
) -> Certificate:
    """Pure-deviation sufficiency check of a candidate root-value triple.

    Enumerates every pure adapted stopping rule and verifies that no pure
    deviation beats the candidate values against the candidate profile, plus
    the root identity <prior, U0> = V0.  Root values default to the supplied
    surfaces' roots.
    """
    from .oracle import RuleSet, enumerate_stopping_rules  # local to avoid a cycle

    tree, pay, w = game.tree, game.payoffs, game.weights
    if u_root is None or v_root is None:
        if surfaces is None:
            raise ValueError("need either root values or surfaces")
        u_root, v_root = surfaces.root_values()
    u_root = np.asarray(u_root, dtype=float)

    rules: RuleSet = enumerate_stopping_rules(tree, cap)
    S, L = rules.stop_matrix, rules.level_matrix
    reach = tree.reach
    zl, zs = profile.zeta.levels, profile.zeta.steps
    violations: list[tuple[str, int, float]] = []

    for i in range(2):
        a = reach * (pay.f[i] * (1.0 - zl) + pay.h[i] * zs)
        b = reach * (pay.g[i] * zs)
        vals = S @ a + (1.0 - L) @ b
        bad = np.flatnonzero(vals < u_root[i] - tol)
        for r in bad:
            violations.append((f"(i) pure tau regime {i}", int(r), float(vals[r] - u_root[i])))

    a2 = reach * sum(
        w[i] * (pay.g[i] * (1.0 - profile.xi(i).levels) + pay.h[i] * profile.xi(i).steps)
        for i in range(2)
    )
    b2 = reach * sum(w[i] * pay.f[i] * profile.xi(i).steps for i in range(2))
    vals = S @ a2 + (1.0 - L) @ b2
    for r in np.flatnonzero(vals > v_root + tol):
        violations.append(("(ii) pure sigma", int(r), float(vals[r] - v_root)))

    gap = abs(w[0] * u_root[0] + w[1] * u_root[1] - v_root)
    if gap > tol:
        violations.append(("(iii) root values", 0, float(gap)))

    return Certificate(not violations, float(v_root), tuple(violations), tol)
