# -*- coding: utf-8 -*-
"""
Oráculos independentes dos solvers.

- crr_american_put: árvore binomial de Cox-Ross-Rubinstein
- black_scholes_put: put europeu em forma fechada
- controlled_drift_value: valor analítico do drift controlado
"""

import math

import numpy as np
from scipy.stats import norm

from src.utils.exceptions import InvalidParams

CRR_STEPS = 10000


def crr_american_put(S0: float, K: float, r: float, vol: float, T: float,
                     steps: int = CRR_STEPS) -> float:
    """
    Preço do put americano pela árvore CRR: u = e^{σ√Δt}, d = 1/u,
    p = (e^{rΔt} - d)/(u - d), exercício antecipado em todos os nós.
    """
    if steps < 1 or vol <= 0 or T <= 0 or S0 <= 0 or K <= 0:
        raise InvalidParams("Parâmetros inválidos para a árvore CRR")
    dt = T / steps
    u = math.exp(vol * math.sqrt(dt))
    d = 1.0 / u
    growth = math.exp(r * dt)
    p = (growth - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise InvalidParams(f"Probabilidade neutra ao risco fora de (0, 1): {p}")
    discount = 1.0 / growth

    # Nós do passo final: S0·u^(n-2k), k = 0..n
    powers = np.arange(steps, -steps - 1, -2, dtype=float)
    values = np.maximum(K - S0 * u ** powers, 0.0)
    for n in range(steps - 1, -1, -1):
        powers = powers[:-1] - 1.0
        continuation = discount * (p * values[:-1] + (1.0 - p) * values[1:])
        values = np.maximum(continuation, K - S0 * u ** powers)
    return float(values[0])


def black_scholes_put(S0: float, K: float, r: float, vol: float, T: float) -> float:
    """Put europeu de Black-Scholes."""
    if vol <= 0 or T <= 0 or S0 <= 0 or K <= 0:
        raise InvalidParams("Parâmetros inválidos para Black-Scholes")
    sqrt_t = math.sqrt(T)
    d1 = (math.log(S0 / K) + (r + 0.5 * vol ** 2) * T) / (vol * sqrt_t)
    d2 = d1 - vol * sqrt_t
    return float(K * math.exp(-r * T) * norm.cdf(-d2) - S0 * norm.cdf(-d1))


def controlled_drift_value(x: float, t: float, vmax: float, T: float) -> float:
    """u(t, x) = x + vmax·(T - t): Φ linear torna v ≡ vmax ótimo."""
    return float(x + vmax * (T - t))


def relative_error(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)
