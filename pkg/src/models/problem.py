# -*- coding: utf-8 -*-
"""
ProblemSpec - Modelo do problema de controle ótimo recursivo com obstáculo.

Funcionalidades:
- Coeficientes do sistema controlado (drift b, difusão σ)
- Driver g, payoff terminal Φ e obstáculo h do BSDE refletido
- Conjunto de controles U (finito ou caixa discretizada)
- Relatório de verificação das hipóteses de Lipschitz

Convenção de formas (todas as funções são vetorizadas com numpy):
    x: (..., n)   v: (..., k)   y: (...,)   z: (..., d)   t: float
    b(t, x, v) -> (..., n)
    σ(t, x, v) -> (..., n, d)
    g(t, x, y, z, v) -> (...,)
    Φ(x) -> (...,)
    h(t, x) -> (...,)
"""

from typing import Any, Callable, Dict, List, Optional, Tuple, Union
from dataclasses import dataclass, field
import itertools

import numpy as np

from src.utils.exceptions import InvalidParams

# Barreira inativa: mantém todos os caminhos de código uniformes sem usar -∞.
INACTIVE_OBSTACLE = -1.0e9

DEFAULT_AXIS_COUNT = 21

DriftFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DriverFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
TerminalFn = Callable[[np.ndarray], np.ndarray]
ObstacleFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FiniteSet:
    """Conjunto finito de vetores de controle."""

    points: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.points) == 0:
            raise InvalidParams("Conjunto de controles vazio")
        dims = {len(p) for p in self.points}
        if len(dims) != 1:
            raise InvalidParams(f"Controles com dimensões diferentes: {sorted(dims)}")
        if not np.all(np.isfinite(np.asarray(self.points, dtype=float))):
            raise InvalidParams("Conjunto de controles ilimitado")

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def grid(self, count: Optional[int] = None) -> np.ndarray:
        """Retorna os controles como array (m, k). `count` é ignorado."""
        return np.asarray(self.points, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': 'finite', 'points': [list(p) for p in self.points]}


@dataclass(frozen=True)
class Box:
    """
    Caixa compacta [lower, upper] discretizada por eixo.

    A discretização é uniforme com `counts[i]` pontos no eixo i, extremos
    incluídos.
    """

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    counts: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if len(self.lower) == 0 or len(self.lower) != len(self.upper):
            raise InvalidParams("Limites da caixa com dimensões inconsistentes")
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidParams("Caixa de controles ilimitada")
        if np.any(hi < lo):
            raise InvalidParams(f"Caixa vazia: lower={self.lower}, upper={self.upper}")
        if not self.counts:
            object.__setattr__(self, 'counts', tuple([DEFAULT_AXIS_COUNT] * len(self.lower)))
        if len(self.counts) != len(self.lower) or any(c < 1 for c in self.counts):
            raise InvalidParams(f"Contagem por eixo inválida: {self.counts}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def grid(self, count: Optional[int] = None) -> np.ndarray:
        """
        Grade cartesiana uniforme dos controles.

        Args:
            count: Se informado, substitui a contagem de todos os eixos

        Returns:
            Array (m, k) com m = produto das contagens
        """
        counts = [count] * self.dim if count else list(self.counts)
        axes = []
        for lo, hi, c in zip(self.lower, self.upper, counts):
            if c == 1 or hi == lo:
                axes.append(np.array([0.5 * (lo + hi)]))
            else:
                axes.append(np.linspace(lo, hi, c))
        return np.array(list(itertools.product(*axes)), dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'box',
            'lower': list(self.lower),
            'upper': list(self.upper),
            'counts': list(self.counts),
        }


ControlSet = Union[FiniteSet, Box]


@dataclass(frozen=True)
class ProblemSpec:
    """
    Dados completos de um problema de controle com obstáculo.

    Imutável após a construção; pode ser compartilhado entre threads.
    """

    name: str
    state_dim: int
    brownian_dim: int
    control_dim: int
    drift: DriftFn
    diffusion: DriftFn
    driver: DriverFn
    terminal: TerminalFn
    obstacle: ObstacleFn
    control_set: ControlSet
    horizon: float
    lipschitz_L: float
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for label, value in (('state_dim', self.state_dim),
                             ('brownian_dim', self.brownian_dim),
                             ('control_dim', self.control_dim)):
            if int(value) < 1:
                raise InvalidParams(f"{label} deve ser positivo, recebido {value}")
        if not self.horizon > 0:
            raise InvalidParams(f"Horizonte T deve ser positivo, recebido {self.horizon}")
        if not self.lipschitz_L > 0:
            raise InvalidParams(f"Constante L deve ser positiva, recebida {self.lipschitz_L}")
        if self.control_set.dim != self.control_dim:
            raise InvalidParams(
                f"Dimensão do controle ({self.control_set.dim}) difere de k={self.control_dim}"
            )

    # ========== GRADE DE CONTROLES ==========

    def control_grid(self, count: Optional[int] = None) -> np.ndarray:
        """Discretização finita de U como array (m, k)."""
        return self.control_set.grid(count)

    # ========== AVALIAÇÃO UNIDIMENSIONAL ==========
    # Atalhos usados pelo lattice e pelo solver de diferenças finitas (n = 1).

    def _state_column(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(xs, dtype=float).reshape(-1, 1)

    def _control_rows(self, v: np.ndarray, count: int) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1, self.control_dim)
        return np.broadcast_to(v, (count, self.control_dim))

    def drift_1d(self, t: float, xs: np.ndarray, v: np.ndarray) -> np.ndarray:
        """b(t, x_j, v) em cada nó; retorna (J,)."""
        X = self._state_column(xs)
        out = np.asarray(self.drift(t, X, self._control_rows(v, len(X))), dtype=float)
        return np.broadcast_to(out, (len(X), 1))[:, 0].copy()

    def diffusion_1d(self, t: float, xs: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Linha de σ(t, x_j, v) em cada nó; retorna (J, d)."""
        X = self._state_column(xs)
        out = np.asarray(self.diffusion(t, X, self._control_rows(v, len(X))), dtype=float)
        out = np.broadcast_to(out, (len(X), 1, self.brownian_dim))
        return out[:, 0, :].copy()

    def driver_1d(self, t: float, xs: np.ndarray, y: np.ndarray, z: np.ndarray,
                  v: np.ndarray) -> np.ndarray:
        """g(t, x_j, y_j, z_j, v) em cada nó; retorna (J,)."""
        X = self._state_column(xs)
        J = len(X)
        y = np.broadcast_to(np.asarray(y, dtype=float), (J,))
        z = np.broadcast_to(np.asarray(z, dtype=float), (J, self.brownian_dim))
        out = self.driver(t, X, y, z, self._control_rows(v, J))
        return np.broadcast_to(np.asarray(out, dtype=float), (J,)).copy()

    def terminal_1d(self, xs: np.ndarray) -> np.ndarray:
        X = self._state_column(xs)
        return np.broadcast_to(np.asarray(self.terminal(X), dtype=float), (len(X),)).copy()

    def obstacle_1d(self, t: float, xs: np.ndarray) -> np.ndarray:
        X = self._state_column(xs)
        return np.broadcast_to(np.asarray(self.obstacle(t, X), dtype=float), (len(X),)).copy()

    def obstacle_is_inactive(self) -> bool:
        """Verdadeiro para problemas declarados com a barreira inativa."""
        return bool(self.params.get('inactive_obstacle', False))

    def to_dict(self) -> Dict[str, Any]:
        """Descrição serializável (coeficientes não são serializados)."""
        return {
            'name': self.name,
            'params': dict(self.params),
            'state_dim': self.state_dim,
            'brownian_dim': self.brownian_dim,
            'control_dim': self.control_dim,
            'horizon': self.horizon,
            'lipschitz_L': self.lipschitz_L,
            'control_set': self.control_set.to_dict(),
        }

    def __str__(self) -> str:
        return f"ProblemSpec(name={self.name}, n={self.state_dim}, T={self.horizon})"


@dataclass
class AssumptionReport:
    """
    Resultado da sondagem das hipóteses de Lipschitz.

    passed ⇔ todo quociente observado ≤ lipschitz_L × (1 + 1e-6).
    A consistência terminal Φ ≥ h(T, ·) é reportada à parte.
    """

    lipschitz_L: float
    max_observed_lipschitz: Dict[str, float]
    violation_points: List[Tuple[str, float, Tuple[float, ...], Tuple[float, ...]]]
    terminal_violations: List[Tuple[float, ...]] = field(default_factory=list)
    tolerance: float = 1e-6
    probes: int = 0
    seed: int = 0

    @property
    def passed(self) -> bool:
        limit = self.lipschitz_L * (1.0 + self.tolerance)
        return all(q <= limit for q in self.max_observed_lipschitz.values())

    @property
    def terminal_consistent(self) -> bool:
        return len(self.terminal_violations) == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lipschitz_L': self.lipschitz_L,
            'max_observed_lipschitz': dict(self.max_observed_lipschitz),
            'violation_count': len(self.violation_points),
            'terminal_violations': len(self.terminal_violations),
            'passed': self.passed,
            'terminal_consistent': self.terminal_consistent,
            'probes': self.probes,
            'seed': self.seed,
        }
