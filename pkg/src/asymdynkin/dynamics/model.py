"""Diffusion-with-hidden-drift models and their JSON expression grammar."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["DiffusionModel", "parse_expression", "model_from_dict", "model_to_dict"]

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?)|(x)|(tanh)|([()+\-*]))")


def parse_expression(src: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a tiny arithmetic grammar into a vectorized callable.

    Grammar: numbers, the state symbol ``x``, ``+``, ``-``, ``*``, ``tanh(...)``
    and parentheses -- enough for constants and affine/tanh drifts without
    ever touching ``eval``.
    """
    tokens: list[str] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ValueError(f"bad token in expression at {src[pos:]!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    tokens.append("<end>")
    idx = 0

    def peek() -> str:
        return tokens[idx]

    def take(expected: str | None = None) -> str:
        nonlocal idx
        tok = tokens[idx]
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, found {tok!r}")
        idx += 1
        return tok

    def expr():
        node = term()
        while peek() in "+-":
            op = take()
            rhs = term()
            node = (lambda a, b: (lambda x: a(x) + b(x))) (node, rhs) if op == "+" else (
                lambda a, b: (lambda x: a(x) - b(x))
            )(node, rhs)
        return node

    def term():
        node = factor()
        while peek() == "*":
            take()
            rhs = factor()
            node = (lambda a, b: (lambda x: a(x) * b(x)))(node, rhs)
        return node

    def factor():
        tok = peek()
        if tok == "-":
            take()
            inner = factor()
            return lambda x: -inner(x)
        if tok == "(":
            take()
            inner = expr()
            take(")")
            return inner
        if tok == "tanh":
            take()
            take("(")
            inner = expr()
            take(")")
            return lambda x: np.tanh(inner(x))
        if tok == "x":
            take()
            return lambda x: np.asarray(x, dtype=float)
        take()
        val = float(tok)
        return lambda x: np.full_like(np.asarray(x, dtype=float), val)

    out = expr()
    take("<end>")
    return out


@dataclass(frozen=True)
class DiffusionModel:
    """State diffusion dX = mu_J(X) dt + sigma(X) dW with hidden J in {0,1}.

    ``w = (mu1 - mu0) / sigma`` is the signal-to-noise ratio governing how
    fast observing X reveals the drift regime.
    """

    mu0: Callable[[np.ndarray], np.ndarray]
    mu1: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    x0: float
    prior: float
    horizon: float
    domain: tuple[float, float]
    sigma_min: float = 1e-6
    source: dict | None = None

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("empty domain")
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError("prior must lie in [0, 1]")
        # validate the volatility floor by finite sampling on the domain
        xs = np.linspace(lo, hi, 257)
        s = np.asarray(self.sigma(xs), dtype=float)
        if np.any(s < self.sigma_min):
            raise ValueError(f"sigma drops below {self.sigma_min} on the domain")

    def w(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (np.asarray(self.mu1(x)) - np.asarray(self.mu0(x))) / np.asarray(self.sigma(x))

    def mu_bar(self, x, psi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.mu0(x)) * (1.0 - psi) + np.asarray(self.mu1(x)) * psi


def model_from_dict(data: dict) -> DiffusionModel:
    """Build a model from the JSON schema {mu0, mu1, sigma, x0, pi, T, domain}."""
    return DiffusionModel(
        mu0=parse_expression(data["mu0"]),
        mu1=parse_expression(data["mu1"]),
        sigma=parse_expression(data["sigma"]),
        x0=float(data["x0"]),
        prior=float(data["pi"]),
        horizon=float(data["T"]),
        domain=(float(data["domain"][0]), float(data["domain"][1])),
        source=dict(data),
    )


def model_to_dict(model: DiffusionModel) -> dict:
    if model.source is None:
        raise ValueError("model was not built from expressions")
    return dict(model.source)
