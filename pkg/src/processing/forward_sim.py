# -*- coding: utf-8 -*-
"""
Simulação de Euler-Maruyama do sistema controlado em dimensão qualquer.

Os incrementos gaussianos de cada caminho vêm de um gerador Philox com
chave (seed, path); o passo é a posição no fluxo do contador. O resultado
não depende da ordem em que os caminhos são processados.
"""

from typing import Callable, Optional, Union
import logging

import numpy as np

from src.models.paths import PathBundle
from src.models.problem import ProblemSpec
from src.processing.persistence import write_csv
from src.utils.exceptions import InvalidParams, NonFiniteState, ShapeMismatch, WindowMismatch

logger = logging.getLogger(__name__)

Policy = Union[Callable[[float, np.ndarray], np.ndarray], np.ndarray, float]


def path_generator(seed: int, path: int) -> np.random.Generator:
    """Gerador baseado em contador para o caminho `path`."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(path)]))


def brownian_increments(seed: int, M: int, Nt: int, d: int, dt: float) -> np.ndarray:
    """Incrementos ΔW com forma (M, Nt, d), reprodutíveis caminho a caminho."""
    out = np.empty((M, Nt, d))
    scale = np.sqrt(dt)
    for p in range(M):
        out[p] = scale * path_generator(seed, p).standard_normal((Nt, d))
    return out


def _control_schedule(spec: ProblemSpec, policy: Policy, M: int, Nt: int):
    """Converte a política em função (i, t, X) → controles (M, k)."""
    k = spec.control_dim
    if callable(policy):
        def feedback(i, t, X):
            v = np.asarray(policy(t, X), dtype=float)
            return np.broadcast_to(v, (M, k))
        return feedback

    path = np.asarray(policy, dtype=float)
    if path.ndim <= 1:
        fixed = np.broadcast_to(path, (M, k))
        return lambda i, t, X: fixed
    if path.ndim == 2:
        if path.shape != (Nt, k):
            raise ShapeMismatch(f"Caminho de controle {path.shape}, esperado ({Nt}, {k})")
        return lambda i, t, X: np.broadcast_to(path[i], (M, k))
    if path.shape != (M, Nt, k):
        raise ShapeMismatch(f"Caminhos de controle {path.shape}, esperado ({M}, {Nt}, {k})")
    return lambda i, t, X: path[:, i]


def simulate(spec: ProblemSpec, policy: Policy, t0: float, x0, Nt: int, M: int,
             seed: int = 0, t1: Optional[float] = None) -> PathBundle:
    """
    Simula M caminhos do sistema controlado em [t0, t1].

    Args:
        spec: Problema
        policy: Política de feedback (t, X) → v, controle constante,
            caminho de controle (Nt, k) ou caminhos por trajetória (M, Nt, k)
        t0: Instante inicial
        x0: Estado inicial (n,)
        Nt: Número de passos (≥ 1)
        M: Número de caminhos (≥ 1)
        seed: Semente
        t1: Instante final (padrão: horizonte T)

    Returns:
        PathBundle

    Raises:
        NonFiniteState: estado não finito em algum caminho
    """
    if Nt < 1 or M < 1:
        raise InvalidParams(f"Nt e M devem ser ≥ 1 (Nt={Nt}, M={M})")
    t1 = spec.horizon if t1 is None else float(t1)
    if not t1 > t0:
        raise InvalidParams(f"Janela vazia: [{t0}, {t1}]")
    n, d, k = spec.state_dim, spec.brownian_dim, spec.control_dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,))

    times = np.linspace(t0, t1, Nt + 1)
    dt = (t1 - t0) / Nt
    dW = brownian_increments(seed, M, Nt, d, dt)
    schedule = _control_schedule(spec, policy, M, Nt)

    states = np.empty((M, Nt + 1, n))
    controls = np.empty((M, Nt, k))
    states[:, 0] = x0
    for i in range(Nt):
        t = float(times[i])
        X = states[:, i]
        v = schedule(i, t, X)
        b = np.broadcast_to(np.asarray(spec.drift(t, X, v), dtype=float), (M, n))
        s = np.broadcast_to(np.asarray(spec.diffusion(t, X, v), dtype=float), (M, n, d))
        nxt = X + b * dt + np.einsum('mnd,md->mn', s, dW[:, i])
        bad = ~np.all(np.isfinite(nxt), axis=1)
        if bad.any():
            raise NonFiniteState(int(np.argmax(bad)), i)
        states[:, i + 1] = nxt
        controls[:, i] = v

    logger.debug("✅ %d caminhos simulados em [%g, %g] (%s, seed=%d)",
                 M, t0, t1, spec.name, seed)
    return PathBundle(
        times=times,
        states=states,
        brownian_increments=dW,
        controls_used=controls,
        seed=seed,
        problem_name=spec.name,
    )


# ========== MOMENTOS ==========

def moment_check(bundle: PathBundle, x0, delta: float) -> float:
    """
    Razão E[sup_{s≤δ} |X_s - x0|²] / δ.

    Raises:
        WindowMismatch: o bundle não cobre uma janela de comprimento δ
    """
    if abs((bundle.t1 - bundle.t0) - delta) > 1e-9 * max(1.0, delta):
        raise WindowMismatch(
            f"Bundle cobre {bundle.t1 - bundle.t0:.6g}, esperado δ={delta:.6g}")
    x0 = np.asarray(x0, dtype=float)
    sq = np.sum((bundle.states - x0) ** 2, axis=2)
    return float(np.mean(sq.max(axis=1)) / delta)


def sup_distance(bundle_a: PathBundle, bundle_b: PathBundle) -> float:
    """E[sup_s |X_s - X'_s|²] entre dois bundles na mesma grade."""
    if bundle_a.states.shape != bundle_b.states.shape:
        raise ShapeMismatch(
            f"Bundles com formas {bundle_a.states.shape} e {bundle_b.states.shape}")
    sq = np.sum((bundle_a.states - bundle_b.states) ** 2, axis=2)
    return float(np.mean(sq.max(axis=1)))


def dump_paths_csv(bundle: PathBundle, file_path: str) -> bool:
    """Exporta (path_id, step, t, x_0, …, x_{n-1})."""
    n = bundle.states.shape[2]
    header = ('path_id', 'step', 't', *[f'x_{c}' for c in range(n)])
    return write_csv(file_path, header, bundle.rows())
