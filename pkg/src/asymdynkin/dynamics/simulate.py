"""Euler simulation of the state/posterior pair under both measures.

Two routes to the posterior psi = P(J=1 | observed path):

* the filter SDE driven by the innovation Brownian motion (observation
  measure), with psi clamped to [0,1] after each Euler step;
* the Bayes/likelihood-ratio formula along a path simulated conditionally on
  the regime, psi = sigmoid(log-likelihood + logit(prior)).

Both converge to the same object as dt -> 0; the self-convergence of their
gap is one of the acceptance checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RandomDevice
from .model import DiffusionModel

__all__ = [
    "PathBundle",
    "simulate_filter_paths",
    "simulate_regime_paths",
    "psi_from_innovation",
    "filter_self_convergence",
]


@dataclass(frozen=True)
class PathBundle:
    """Simulated (X, psi) paths sampled on a regular dt-grid."""

    t: np.ndarray
    x: np.ndarray
    psi: np.ndarray
    regime: np.ndarray | None
    exited: np.ndarray
    seed: int
    stream: int
    dt: float
    max_clamp: float = 0.0

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]


def _time_axis(model: DiffusionModel, dt: float) -> np.ndarray:
    n_steps = int(round(model.horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - model.horizon) > 1e-9 * max(1.0, model.horizon):
        raise ValueError("dt must divide the horizon")
    return np.linspace(0.0, model.horizon, n_steps + 1)


def simulate_filter_paths(
    model: DiffusionModel, n: int, dt: float, device: RandomDevice
) -> PathBundle:
    """Euler-Maruyama for the coupled (X, psi) SDE under the observation law.

    dX = mu_bar(X, psi) dt + sigma(X) dB and d psi = w(X) psi (1-psi) dB with
    a shared innovation increment; psi is clamped to [0, 1] after each step
    and the largest pre-clamp excursion is reported as a diagnostic.
    """
    t = _time_axis(model, dt)
    rng = device.generator()
    lo, hi = model.domain
    x = np.full((n, t.size), model.x0)
    psi = np.full((n, t.size), model.prior)
    exited = np.zeros(n, dtype=bool)
    max_clamp = 0.0
    sqdt = np.sqrt(dt)
    for k in range(t.size - 1):
        xk, pk = x[:, k], psi[:, k]
        db = rng.standard_normal(n) * sqdt
        x[:, k + 1] = xk + model.mu_bar(xk, pk) * dt + np.asarray(model.sigma(xk)) * db
        raw = pk + model.w(xk) * pk * (1.0 - pk) * db
        max_clamp = max(max_clamp, float(np.max(raw - 1.0, initial=0.0)), float(np.max(-raw, initial=0.0)))
        psi[:, k + 1] = np.clip(raw, 0.0, 1.0)
        exited |= (x[:, k + 1] < lo) | (x[:, k + 1] > hi)
    return PathBundle(t, x, psi, None, exited, device.seed, device.stream, dt, max_clamp)


def simulate_regime_paths(
    model: DiffusionModel, n: int, dt: float, device: RandomDevice
) -> PathBundle:
    """Draw the regime, simulate X with the true drift, filter by Bayes.

    psi is the exact conditional probability given the discretized path,
    computed from the accumulated Girsanov log-likelihood ratio of drift mu1
    against mu0; the sigmoid form keeps it in (0, 1) without clamping.
    """
    t = _time_axis(model, dt)
    rng = device.generator()
    regime = (device.with_stream(device.stream + 1).uniforms(n) < model.prior).astype(np.int64)
    lo, hi = model.domain
    x = np.full((n, t.size), model.x0)
    psi = np.full((n, t.size), model.prior)
    exited = np.zeros(n, dtype=bool)
    loglik = np.zeros(n)
    if model.prior in (0.0, 1.0):
        logit0 = np.inf if model.prior == 1.0 else -np.inf
    else:
        logit0 = float(np.log(model.prior / (1.0 - model.prior)))
    sqdt = np.sqrt(dt)
    for k in range(t.size - 1):
        xk = x[:, k]
        m0 = np.asarray(model.mu0(xk), dtype=float)
        m1 = np.asarray(model.mu1(xk), dtype=float)
        s = np.asarray(model.sigma(xk), dtype=float)
        drift = np.where(regime == 1, m1, m0)
        dw = rng.standard_normal(n) * sqdt
        dx = drift * dt + s * dw
        x[:, k + 1] = xk + dx
        loglik += (m1 - m0) / s**2 * dx - 0.5 * (m1**2 - m0**2) / s**2 * dt
        with np.errstate(over="ignore"):
            psi[:, k + 1] = 1.0 / (1.0 + np.exp(-(loglik + logit0)))
        exited |= (x[:, k + 1] < lo) | (x[:, k + 1] > hi)
    return PathBundle(t, x, psi, regime, exited, device.seed, device.stream, dt)


def filter_self_convergence(
    model: DiffusionModel, n: int, dts: list[float], device: RandomDevice
) -> list[float]:
    """Pathwise RMS gap between the two posterior routes at each dt.

    A single Brownian skeleton at the finest dt is aggregated to the coarser
    levels; on each level X is simulated conditionally on a common regime
    draw, and the likelihood-ratio posterior is compared with the filter-SDE
    posterior integrated from the reconstructed innovations.  The RMS gap
    shrinks as dt does (both routes converge to the same filter).
    """
    dts = sorted(dts, reverse=True)
    dt_min = dts[-1]
    steps = int(round(model.horizon / dt_min))
    rng = device.generator()
    dw_fine = rng.standard_normal((n, steps)) * np.sqrt(dt_min)
    regime = (device.with_stream(device.stream + 1).uniforms(n) < model.prior).astype(np.int64)
    logit0 = float(np.log(model.prior / (1.0 - model.prior)))

    out = []
    for dt in dts:
        m = int(round(dt / dt_min))
        dw = dw_fine[:, : (steps // m) * m].reshape(n, -1, m).sum(axis=2)
        k_steps = dw.shape[1]
        x = np.full((n, k_steps + 1), model.x0)
        loglik = np.zeros(n)
        psi_lr = np.full((n, k_steps + 1), model.prior)
        for k in range(k_steps):
            xk = x[:, k]
            m0 = np.asarray(model.mu0(xk), dtype=float)
            m1 = np.asarray(model.mu1(xk), dtype=float)
            s = np.asarray(model.sigma(xk), dtype=float)
            dx = np.where(regime == 1, m1, m0) * dt + s * dw[:, k]
            x[:, k + 1] = xk + dx
            loglik += (m1 - m0) / s**2 * dx - 0.5 * (m1**2 - m0**2) / s**2 * dt
            psi_lr[:, k + 1] = 1.0 / (1.0 + np.exp(-(loglik + logit0)))
        psi_sde = psi_from_innovation(model, x, dt)
        out.append(float(np.sqrt(np.mean((psi_sde - psi_lr) ** 2))))
    return out


def psi_from_innovation(model: DiffusionModel, x: np.ndarray, dt: float) -> np.ndarray:
    """Filter-SDE posterior reconstructed from observed X increments.

    Integrates d psi = w(X) psi (1-psi) dB with dB read off the path:
    dB = (dX - mu_bar(X, psi) dt) / sigma(X).  This is the uninformed
    player's online computation on an arbitrary trajectory.
    """
    n, steps = x.shape[0], x.shape[1] - 1
    psi = np.empty((n, steps + 1))
    psi[:, 0] = model.prior
    for k in range(steps):
        xk, pk = x[:, k], psi[:, k]
        s = np.asarray(model.sigma(xk), dtype=float)
        db = (x[:, k + 1] - xk - model.mu_bar(xk, pk) * dt) / s
        psi[:, k + 1] = np.clip(pk + model.w(xk) * pk * (1.0 - pk) * db, 0.0, 1.0)
    return psi
