# -*- coding: utf-8 -*-
"""
Biblioteca de problemas de referência (benchmarks com oráculos conhecidos).

Problemas embutidos:
- american_put: put americano (sem controle), g = -r·y
- controlled_drift: drift controlado b = v, valor analítico x + vmax·(T - t)
- constant_obstacle: Φ ≡ h ≡ c, solução constante
- inactive_obstacle: barreira h ≡ -1e9, BSDE sem reflexão
- nonlinear_driver_put: put americano com g = -r·y - λ·|z|

Problemas customizados são registrados via register_problem().
"""

from typing import Any, Callable, Dict, List, Tuple
import logging

import numpy as np

from src.models.problem import INACTIVE_OBSTACLE, Box, FiniteSet, ProblemSpec
from src.utils.exceptions import InvalidParams, UnknownProblem

logger = logging.getLogger(__name__)

ProblemFactory = Callable[..., ProblemSpec]

_REGISTRY: Dict[str, ProblemFactory] = {}


def register_problem(name: str, factory: ProblemFactory):
    """Registra uma fábrica de problema customizado."""
    if not name.isidentifier():
        raise InvalidParams(f"Nome de problema inválido: {name!r}")
    _REGISTRY[name] = factory


def list_problems() -> List[str]:
    """Nomes de todos os problemas disponíveis, em ordem alfabética."""
    return sorted(_REGISTRY)


def builtin_problem(name: str, params: Dict[str, Any] = None) -> ProblemSpec:
    """
    Constrói um problema pelo nome.

    Args:
        name: Identificador do problema
        params: Parâmetros nomeados (valores padrão para os ausentes)

    Returns:
        ProblemSpec totalmente preenchido

    Raises:
        UnknownProblem: nome não registrado
        InvalidParams: parâmetro desconhecido ou fora do domínio
    """
    factory = _REGISTRY.get(name)
    if factory is None:
        raise UnknownProblem(f"Problema desconhecido: {name!r} (disponíveis: {list_problems()})")
    try:
        spec = factory(**dict(params or {}))
    except TypeError as e:
        raise InvalidParams(f"Parâmetros inválidos para {name}: {e}") from e
    logger.debug("✅ Problema %s construído com %s", name, spec.params)
    return spec


def suggested_domain(spec: ProblemSpec) -> Tuple[float, float]:
    """Domínio espacial padrão (≥ 4 desvios-padrão de largura)."""
    if 'K' in spec.params:
        K = float(spec.params['K'])
        return 0.2 * K, 3.0 * K
    return -6.0, 6.0


def suggested_x0(spec: ProblemSpec) -> float:
    """Ponto inicial padrão para relatórios."""
    return float(spec.params.get('S0', 0.0))


# ========== VALIDAÇÃO DE PARÂMETROS ==========

def _positive(label: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidParams(f"{label} deve ser positivo, recebido {value}")
    return value


def _non_negative(label: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise InvalidParams(f"{label} deve ser não negativo, recebido {value}")
    return value


def _no_control() -> FiniteSet:
    return FiniteSet(points=((0.0,),))


# ========== PROBLEMAS EMBUTIDOS ==========

def american_put(S0: float = 100.0, K: float = 100.0, r: float = 0.05,
                 vol: float = 0.2, T: float = 1.0) -> ProblemSpec:
    """Put americano: b = r·x, σ = vol·x, g = -r·y, Φ = h = (K - x)⁺."""
    S0 = _positive('S0', S0)
    K = _positive('K', K)
    r = _non_negative('r', r)
    vol = _positive('vol', vol)
    T = _positive('T', T)

    def payoff(x):
        return np.maximum(K - x[..., 0], 0.0)

    return ProblemSpec(
        name='american_put',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=lambda t, x, v: r * x,
        diffusion=lambda t, x, v: vol * x[..., None],
        driver=lambda t, x, y, z, v: -r * y,
        terminal=payoff,
        obstacle=lambda t, x: payoff(x),
        control_set=_no_control(),
        horizon=T,
        lipschitz_L=max(r, vol, 1.0),
        params={'S0': S0, 'K': K, 'r': r, 'vol': vol, 'T': T},
    )


def nonlinear_driver_put(S0: float = 100.0, K: float = 100.0, r: float = 0.05,
                         vol: float = 0.2, T: float = 1.0, lam: float = 0.5) -> ProblemSpec:
    """Put americano com driver não linear g = -r·y - λ·|z|."""
    base = american_put(S0=S0, K=K, r=r, vol=vol, T=T)
    lam = _non_negative('lam', lam)
    r = base.params['r']

    def driver(t, x, y, z, v):
        return -r * y - lam * np.linalg.norm(z, axis=-1)

    return ProblemSpec(
        name='nonlinear_driver_put',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=base.drift,
        diffusion=base.diffusion,
        driver=driver,
        terminal=base.terminal,
        obstacle=base.obstacle,
        control_set=base.control_set,
        horizon=base.horizon,
        lipschitz_L=max(base.lipschitz_L, r + lam),
        params={**base.params, 'lam': lam},
    )


def controlled_drift(vmax: float = 1.0, T: float = 1.0, count: int = 21) -> ProblemSpec:
    """b = v ∈ [-vmax, vmax], σ = 1, g = 0, Φ(x) = x, barreira inativa."""
    vmax = _non_negative('vmax', vmax)
    T = _positive('T', T)
    if int(count) < 1:
        raise InvalidParams(f"count deve ser ≥ 1, recebido {count}")

    return ProblemSpec(
        name='controlled_drift',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=lambda t, x, v: v + 0.0 * x,
        diffusion=lambda t, x, v: np.ones(x.shape + (1,)),
        driver=lambda t, x, y, z, v: np.zeros(np.shape(y)),
        terminal=lambda x: x[..., 0].copy(),
        obstacle=lambda t, x: np.full(x.shape[:-1], INACTIVE_OBSTACLE),
        control_set=Box(lower=(-vmax,), upper=(vmax,), counts=(int(count),)),
        horizon=T,
        lipschitz_L=1.0,
        params={'vmax': vmax, 'T': T, 'count': int(count), 'inactive_obstacle': True},
    )


def constant_obstacle(c: float = 0.0, T: float = 1.0) -> ProblemSpec:
    """b = 0, σ = 1, g = 0, Φ ≡ h ≡ c."""
    c = float(c)
    T = _positive('T', T)

    return ProblemSpec(
        name='constant_obstacle',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=lambda t, x, v: np.zeros(x.shape),
        diffusion=lambda t, x, v: np.ones(x.shape + (1,)),
        driver=lambda t, x, y, z, v: np.zeros(np.shape(y)),
        terminal=lambda x: np.full(x.shape[:-1], c),
        obstacle=lambda t, x: np.full(x.shape[:-1], c),
        control_set=_no_control(),
        horizon=T,
        lipschitz_L=1.0,
        params={'c': c, 'T': T},
    )


def inactive_obstacle(drift: float = 0.0, vol: float = 1.0, T: float = 1.0) -> ProblemSpec:
    """b constante, σ constante, g = 0, Φ(x) = x, h ≡ -1e9."""
    drift = float(drift)
    vol = _positive('vol', vol)
    T = _positive('T', T)

    return ProblemSpec(
        name='inactive_obstacle',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=lambda t, x, v: np.full(x.shape, drift),
        diffusion=lambda t, x, v: np.full(x.shape + (1,), vol),
        driver=lambda t, x, y, z, v: np.zeros(np.shape(y)),
        terminal=lambda x: x[..., 0].copy(),
        obstacle=lambda t, x: np.full(x.shape[:-1], INACTIVE_OBSTACLE),
        control_set=_no_control(),
        horizon=T,
        lipschitz_L=max(1.0, abs(drift), vol),
        params={'drift': drift, 'vol': vol, 'T': T, 'inactive_obstacle': True},
    )


register_problem('american_put', american_put)
register_problem('nonlinear_driver_put', nonlinear_driver_put)
register_problem('controlled_drift', controlled_drift)
register_problem('constant_obstacle', constant_obstacle)
register_problem('inactive_obstacle', inactive_obstacle)
