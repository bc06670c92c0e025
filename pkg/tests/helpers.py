"""Independent reference implementations used as test oracles.

Everything here recomputes quantities from first principles (enumeration,
plain backward induction) without touching the library's bookkeeping, so a
bug in the package cannot hide in its own oracle.
"""

from __future__ import annotations

import numpy as np

from asymdynkin.core import FiltrationTree, PayoffTriple, realized_payoff


def brute_force_expected(tree, payoffs: PayoffTriple, xi, zeta, prior=None) -> float:
    """Expectation by full enumeration of (path, tau-atom, sigma-atom)."""
    regimes = [(1.0, payoffs, xi)] if not payoffs.per_regime else [
        (1.0 - prior, payoffs.regime(0), xi[0]),
        (prior, payoffs.regime(1), xi[1]),
    ]
    total = 0.0
    for row, leaf in enumerate(tree.leaves):
        path = tree.paths[row]
        p_path = tree.reach[leaf]
        zl = zeta.levels[path]
        dz = np.diff(np.concatenate([[0.0], zl]))
        for w, pay, x in regimes:
            xl = x.levels[path]
            dx = np.diff(np.concatenate([[0.0], xl]))
            for k in range(path.size):
                if dx[k] == 0.0:
                    continue
                for l in range(path.size):
                    if dz[l] == 0.0:
                        continue
                    total += w * p_path * dx[k] * dz[l] * realized_payoff(pay, path, k, l)
    return total


def atom_count(tree, xi, zeta, prior=None) -> int:
    """Number of (path, tau, sigma) atoms enumerated by brute_force_expected."""
    count = 0
    xis = [xi] if not isinstance(xi, tuple) else list(xi)
    for row in range(tree.leaves.size):
        path = tree.paths[row]
        zl = zeta.levels[path]
        dz = np.diff(np.concatenate([[0.0], zl]))
        for x in xis:
            xl = x.levels[path]
            dx = np.diff(np.concatenate([[0.0], xl]))
            count += int(np.count_nonzero(dx) * np.count_nonzero(dz))
    return count


def one_sided_stop_value(
    tree: FiltrationTree, running: np.ndarray, terminal: np.ndarray, maximize: bool = True
) -> float:
    """Plain backward-induction optimal stopping on the tree."""
    best = np.zeros(tree.n_nodes)
    for node in range(tree.n_nodes - 1, -1, -1):
        kids = tree.children[node]
        if kids.size == 0:
            best[node] = terminal[node]
        else:
            cont = float(np.dot(tree.prob[kids], best[kids]))
            best[node] = max(running[node], cont) if maximize else min(running[node], cont)
    return float(best[0])
