"""Coupled free-boundary system for the continuous-state stopping game.

Three surfaces on a (t, pi, x) grid: per-regime informed values u0, u1 and
the uninformed value v, solved backward in time by a policy-type iteration
per slice:

* u_i obeys an implicit step of its regime generator off the opponent's
  stopping set S = {v = g} and is pinned to g inside it (the opponent stops
  first there), then projected onto u_i <= f;
* v obeys the observation generator off the informed stopping sets and is
  pinned to pi u1 + (1-pi) u0 inside S0 u S1, then projected onto v >= g;
* the belief-flattening constraint d_pi u_i = 0 is enforced across S0 u S1
  by a one-sided copy from the adjacent continuation value.

At pi in {0, 1} every pi-coefficient carries a pi(1-pi) factor and vanishes,
so the boundary rows reduce naturally to the one-regime problems; no
artificial boundary data is imposed there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import DiffusionModel

__all__ = [
    "PDEGrid",
    "PDESurfaces",
    "NoConvergence",
    "CFLViolation",
    "pde_solve_system",
    "reference_dynkin_1d",
]


class NoConvergence(RuntimeError):
    """A slice iteration failed to stabilize within the budget."""


class CFLViolation(ValueError):
    """Explicit stepping requested with a time step above the CFL bound."""


@dataclass(frozen=True)
class PDEGrid:
    """Uniform grids in t, pi (odd count so pi = 1/2 is a node) and x."""

    t: np.ndarray
    pi: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        for name in ("t", "pi", "x"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.pi.size % 2 == 0:
            raise ValueError("pi grid must have an odd number of points")
        if abs(self.pi[0]) > 1e-14 or abs(self.pi[-1] - 1.0) > 1e-14:
            raise ValueError("pi grid must span [0, 1]")

    @staticmethod
    def regular(horizon: float, domain: tuple[float, float], m_t: int, m_pi: int, m_x: int) -> "PDEGrid":
        return PDEGrid(
            np.linspace(0.0, horizon, m_t),
            np.linspace(0.0, 1.0, m_pi),
            np.linspace(domain[0], domain[1], m_x),
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.t.size, self.pi.size, self.x.size


@dataclass(frozen=True)
class PDESurfaces:
    """Converged value surfaces with their stopping sets."""

    grid: PDEGrid
    u0: np.ndarray
    u1: np.ndarray
    v: np.ndarray
    in_s0: np.ndarray
    in_s1: np.ndarray
    in_s: np.ndarray
    identity_residual: float

    def u(self, i: int) -> np.ndarray:
        return self.u1 if i else self.u0


def _operator(model: DiffusionModel, grid: PDEGrid, mode) -> sp.csr_matrix:
    """Sparse spatial generator on the (pi, x) sheet for one drift mode.

    ``mode`` is "obs" (observation measure, belief-matched drift, no
    pi-drift) or a regime index with the tilted pi-drift.  First derivatives
    are upwinded; the cross term is centered; x-boundaries are reflecting.
    """
    pi, x = grid.pi, grid.x
    mpi, mx = pi.size, x.size
    dpi = pi[1] - pi[0]
    dx = x[1] - x[0]
    P, X = np.meshgrid(pi, x, indexing="ij")

    sig = np.asarray(model.sigma(X), dtype=float)
    w = np.asarray(model.w(X), dtype=float)
    if mode == "obs":
        ax = model.mu_bar(X, P)
        bpi = np.zeros_like(P)
    elif mode == 1:
        ax = np.broadcast_to(np.asarray(model.mu1(X), dtype=float), P.shape)
        bpi = w**2 * P * (1.0 - P) ** 2
    else:
        ax = np.broadcast_to(np.asarray(model.mu0(X), dtype=float), P.shape)
        bpi = -(w**2) * P**2 * (1.0 - P)
    dxx = 0.5 * sig**2
    dpp = 0.5 * w**2 * P**2 * (1.0 - P) ** 2
    cross = sig * w * P * (1.0 - P)

    def flat(i, j):
        return i * mx + j

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    I, J = np.meshgrid(np.arange(mpi), np.arange(mx), indexing="ij")
    center = flat(I, J)

    # x diffusion with reflecting boundaries
    coef = dxx / dx**2
    inner = J[:, 1:-1]
    add(center[:, 1:-1].ravel(), flat(I[:, 1:-1], inner + 1).ravel(), coef[:, 1:-1].ravel())
    add(center[:, 1:-1].ravel(), flat(I[:, 1:-1], inner - 1).ravel(), coef[:, 1:-1].ravel())
    add(center[:, 1:-1].ravel(), center[:, 1:-1].ravel(), (-2 * coef[:, 1:-1]).ravel())
    for j, nb in ((0, 1), (mx - 1, mx - 2)):
        add(center[:, j], flat(I[:, j], np.full(mpi, nb)), 2 * coef[:, j])
        add(center[:, j], center[:, j], -2 * coef[:, j])

    # upwinded x drift (zero flux at the boundaries)
    ap = np.maximum(ax, 0.0) / dx
    am = np.minimum(ax, 0.0) / dx
    add(center[:, 1:-1].ravel(), flat(I[:, 1:-1], inner + 1).ravel(), ap[:, 1:-1].ravel())
    add(center[:, 1:-1].ravel(), center[:, 1:-1].ravel(), (-ap[:, 1:-1] + am[:, 1:-1]).ravel())
    add(center[:, 1:-1].ravel(), flat(I[:, 1:-1], inner - 1).ravel(), (-am[:, 1:-1]).ravel())

    # pi diffusion and upwinded pi drift (coefficients vanish at pi = 0, 1)
    ip = I[1:-1, :]
    coefp = dpp / dpi**2
    add(center[1:-1, :].ravel(), flat(ip + 1, J[1:-1, :]).ravel(), coefp[1:-1, :].ravel())
    add(center[1:-1, :].ravel(), flat(ip - 1, J[1:-1, :]).ravel(), coefp[1:-1, :].ravel())
    add(center[1:-1, :].ravel(), center[1:-1, :].ravel(), (-2 * coefp[1:-1, :]).ravel())
    bp = np.maximum(bpi, 0.0) / dpi
    bm = np.minimum(bpi, 0.0) / dpi
    add(center[1:-1, :].ravel(), flat(ip + 1, J[1:-1, :]).ravel(), bp[1:-1, :].ravel())
    add(center[1:-1, :].ravel(), center[1:-1, :].ravel(), (-bp[1:-1, :] + bm[1:-1, :]).ravel())
    add(center[1:-1, :].ravel(), flat(ip - 1, J[1:-1, :]).ravel(), (-bm[1:-1, :]).ravel())

    # centered cross term on the doubly interior block
    cc = cross[1:-1, 1:-1] / (4.0 * dpi * dx)
    ii, jj = I[1:-1, 1:-1], J[1:-1, 1:-1]
    for spi, sxj, sgn in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
        add(flat(ii, jj).ravel(), flat(ii + spi, jj + sxj).ravel(), (sgn * cc).ravel())

    n = mpi * mx
    rows = np.concatenate([np.asarray(r).ravel() for r in rows])
    cols = np.concatenate([np.asarray(c).ravel() for c in cols])
    vals = np.concatenate([np.asarray(v).ravel() for v in vals])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _masked_solve(a_base: sp.csr_matrix, mask: np.ndarray, pinned: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A u = rhs with masked rows replaced by u = pinned."""
    free = (~mask).astype(float)
    a = sp.diags(free) @ a_base + sp.diags(mask.astype(float))
    b = np.where(mask, pinned, rhs)
    return spla.spsolve(a.tocsc(), b)


def _explicit_step(l_op, dt, values, mask, pinned):
    out = values + dt * (l_op @ values)
    return np.where(mask, pinned, out)


def _cfl_bound(model: DiffusionModel, grid: PDEGrid) -> float:
    pi, x = grid.pi, grid.x
    dpi, dx = pi[1] - pi[0], x[1] - x[0]
    P, X = np.meshgrid(pi, x, indexing="ij")
    sig = np.asarray(model.sigma(X), dtype=float)
    w = np.asarray(model.w(X), dtype=float)
    mu = max(
        float(np.max(np.abs(model.mu0(x)))),
        float(np.max(np.abs(model.mu1(x)))),
    )
    rate = (
        (sig**2) / dx**2
        + (w**2 * P**2 * (1 - P) ** 2) / dpi**2
        + np.abs(sig * w * P * (1 - P)) / (dpi * dx)
        + mu / dx
        + np.abs(w**2 * P * (1 - P)) / dpi
    )
    return 1.0 / float(rate.max())


def _pi_copy(u_other: np.ndarray, run_mask: np.ndarray, from_below: bool) -> np.ndarray:
    """Flatten the opponent incarnation's surface across an action region.

    While incarnation i acts, the belief jumps through the run to the
    nearest continuation point (below for i = 1, above for i = 0), so the
    *other* incarnation's value is constant across the run and equals the
    value at that landing point.  The acting incarnation's own surface
    already sits on the pi-independent obstacle f and needs no copy.  Runs
    reaching the pi-boundary with no landing point are left untouched (the
    acting incarnation stops outright there).
    """
    mpi = u_other.shape[0]
    out = u_other.copy()
    for j in range(u_other.shape[1]):
        col = run_mask[:, j]
        if not col.any():
            continue
        i = 0
        while i < mpi:
            if not col[i]:
                i += 1
                continue
            a = i
            while i < mpi and col[i]:
                i += 1
            b = i - 1
            if from_below:
                if a > 0:
                    out[a : b + 1, j] = u_other[a - 1, j]
            else:
                if b < mpi - 1:
                    out[a : b + 1, j] = u_other[b + 1, j]
    return out


def pde_solve_system(
    model: DiffusionModel,
    f: Callable,
    g: Callable,
    h: Callable,
    grid: PDEGrid,
    slice_tol: float = 1e-8,
    max_iters: int = 200,
    scheme: str = "implicit",
    set_tol: float = 1e-10,
) -> PDESurfaces:
    """Backward region-iteration solve of the coupled variational system.

    ``f``, ``g``, ``h`` are payoff functions of (t, x) with f >= h >= g;
    terminal data is h(T, .) for all three surfaces.  Raises NoConvergence
    if a slice fails to stabilize and CFLViolation when the explicit scheme
    is selected with too large a time step.
    """
    mt, mpi, mx = grid.shape
    dt = grid.t[1] - grid.t[0]
    if scheme not in ("implicit", "explicit"):
        raise ValueError("scheme must be 'implicit' or 'explicit'")
    if scheme == "explicit":
        bound = _cfl_bound(model, grid)
        if dt > bound:
            raise CFLViolation(f"dt={dt} exceeds the explicit stability bound {bound:.3e}")

    ops = {i: _operator(model, grid, i) for i in (0, 1)}
    ops["obs"] = _operator(model, grid, "obs")
    eye = sp.identity(mpi * mx, format="csr")
    a_imp = {k: (eye - dt * op).tocsr() for k, op in ops.items()}

    pi_col = grid.pi[:, None]
    u = np.empty((2, mt, mpi, mx))
    v = np.empty((mt, mpi, mx))
    term = np.broadcast_to(np.asarray(h(grid.t[-1], grid.x)), (mpi, mx)).copy()
    u[0, -1] = u[1, -1] = term
    v[-1] = term

    def payoff_slices(t):
        ft = np.broadcast_to(np.asarray(f(t, grid.x), dtype=float), (mpi, mx))
        gt = np.broadcast_to(np.asarray(g(t, grid.x), dtype=float), (mpi, mx))
        return ft, gt

    in_s0 = np.zeros((mt, mpi, mx), dtype=bool)
    in_s1 = np.zeros((mt, mpi, mx), dtype=bool)
    in_s = np.zeros((mt, mpi, mx), dtype=bool)
    ft, gt = payoff_slices(grid.t[-1])
    in_s0[-1] = u[0, -1] >= ft - set_tol
    in_s1[-1] = u[1, -1] >= ft - set_tol
    in_s[-1] = v[-1] <= gt + set_tol

    identity_residual = 0.0
    scale = max(1.0, float(np.max(np.abs(term))))

    for k in range(mt - 2, -1, -1):
        t = grid.t[k]
        ft, gt = payoff_slices(t)
        u_next = [u[i, k + 1].reshape(-1) for i in range(2)]
        v_next = v[k + 1].reshape(-1)
        u_cur = [u[i, k + 1].copy() for i in range(2)]
        v_cur = v[k + 1].copy()
        # the opponent-stop pin for u uses the last converged stopping set
        # (one-step time lag); the fully coupled within-slice fixed point can
        # cycle, while this explicit treatment terminates and is O(dt)
        s_mask = in_s[k + 1]

        converged = False
        for _ in range(max_iters):
            new_u = []
            for i in range(2):
                if scheme == "implicit":
                    sol = _masked_solve(a_imp[i], s_mask.reshape(-1), gt.reshape(-1), u_next[i])
                else:
                    sol = _explicit_step(ops[i], dt, u_next[i], s_mask.reshape(-1), gt.reshape(-1))
                new_u.append(np.minimum(sol.reshape(mpi, mx), ft))
            s_i_new = [new_u[i] >= ft - set_tol for i in range(2)]
            only1 = s_i_new[1] & ~s_i_new[0]
            only0 = s_i_new[0] & ~s_i_new[1]
            # belief jumps flatten the opponent's surface across each run
            new_u[0] = np.minimum(_pi_copy(new_u[0], only1, from_below=True), ft)
            new_u[1] = np.minimum(_pi_copy(new_u[1], only0, from_below=False), ft)
            s_i_new = [new_u[i] >= ft - set_tol for i in range(2)]

            informed_mask = s_i_new[0] | s_i_new[1]
            pinned_v = pi_col * new_u[1] + (1.0 - pi_col) * new_u[0]
            if scheme == "implicit":
                sol_v = _masked_solve(
                    a_imp["obs"], informed_mask.reshape(-1), pinned_v.reshape(-1), v_next
                )
            else:
                sol_v = _explicit_step(
                    ops["obs"], dt, v_next, informed_mask.reshape(-1), pinned_v.reshape(-1)
                )
            new_v = np.maximum(sol_v.reshape(mpi, mx), gt)

            delta = max(
                float(np.max(np.abs(new_u[0] - u_cur[0]))),
                float(np.max(np.abs(new_u[1] - u_cur[1]))),
                float(np.max(np.abs(new_v - v_cur))),
            )
            u_cur, v_cur = new_u, new_v
            if delta <= slice_tol * scale:
                converged = True
                break
        if not converged:
            raise NoConvergence(f"slice {k} (t={t}) did not stabilize; last delta {delta:.3e}")

        u[0, k], u[1, k], v[k] = u_cur[0], u_cur[1], v_cur
        in_s0[k] = u_cur[0] >= ft - set_tol
        in_s1[k] = u_cur[1] >= ft - set_tol
        in_s[k] = v_cur <= gt + set_tol
        cont = ~(in_s0[k] | in_s1[k] | in_s[k])
        if cont.any():
            resid = np.abs(v_cur - (pi_col * u_cur[1] + (1.0 - pi_col) * u_cur[0]))
            identity_residual = max(identity_residual, float(resid[cont].max()))

    return PDESurfaces(grid, u[0], u[1], v, in_s0, in_s1, in_s, identity_residual)


def reference_dynkin_1d(
    drift: Callable,
    sigma: Callable,
    f: Callable,
    g: Callable,
    h: Callable,
    t: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Full-information double-obstacle value on a (t, x) grid.

    Independent projected implicit scheme: one backward Euler step with the
    one-regime generator, then clip into [g, f].  Used as the reference for
    the degenerate reduction of the coupled system and for spot checks.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    mt, mx = t.size, x.size
    dtau = t[1] - t[0]
    dx = x[1] - x[0]
    mu = np.asarray(drift(x), dtype=float) * np.ones(mx)
    sig = np.asarray(sigma(x), dtype=float) * np.ones(mx)

    main = np.zeros(mx)
    upper = np.zeros(mx)
    lower = np.zeros(mx)
    d2 = 0.5 * sig**2 / dx**2
    ap = np.maximum(mu, 0.0) / dx
    am = np.minimum(mu, 0.0) / dx
    upper[1:-1] = d2[1:-1] + ap[1:-1]
    lower[1:-1] = d2[1:-1] - am[1:-1]
    main[1:-1] = -2 * d2[1:-1] - ap[1:-1] + am[1:-1]
    # reflecting ends
    upper[0] = 2 * d2[0]
    main[0] = -2 * d2[0]
    lower[-1] = 2 * d2[-1]
    main[-1] = -2 * d2[-1]
    l1 = sp.diags(
        [lower[1:], main, upper[:-1]], offsets=[-1, 0, 1], format="csc"
    )
    a = (sp.identity(mx, format="csc") - dtau * l1).tocsc()
    solve = spla.factorized(a)

    out = np.empty((mt, mx))
    out[-1] = np.asarray(h(t[-1], x), dtype=float) * np.ones(mx)
    for k in range(mt - 2, -1, -1):
        stepped = solve(out[k + 1])
        ft = np.asarray(f(t[k], x), dtype=float) * np.ones(mx)
        gt = np.asarray(g(t[k], x), dtype=float) * np.ones(mx)
        out[k] = np.clip(stepped, gt, ft)
    return out
