# -*- coding: utf-8 -*-
"""
Registros das verificações estruturais (semigrupo, DPP, regularidade,
penalização).
"""

from typing import Any, Dict, List, Optional, Tuple, Union
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class SemigroupQuery:
    """
    Consulta G_{t,t+δ}[η] no ponto (t, x).

    control: índice fixo, tabela de política (N, J) ou None para a
    otimização por nó dentro da janela.
    """

    t: float
    x: float
    delta: float
    terminal_field: np.ndarray
    control: Union[int, np.ndarray, None] = 0


@dataclass
class DPPReport:
    """
    Lados do princípio da programação dinâmica em pontos de amostra.

    rhs: variante com re-otimização por nó (política adaptada na janela)
    rhs_frozen: variante com controle constante na janela
    """

    sample_points: List[Tuple[float, float]]
    lhs: List[float]
    rhs: List[float]
    rhs_frozen: List[float]
    delta: float
    grid_params: Dict[str, Any] = field(default_factory=dict)

    @property
    def max_abs_gap(self) -> float:
        if not self.lhs:
            return 0.0
        return float(np.max(np.abs(np.subtract(self.lhs, self.rhs))))

    @property
    def max_abs_gap_frozen(self) -> float:
        if not self.lhs:
            return 0.0
        return float(np.max(np.abs(np.subtract(self.lhs, self.rhs_frozen))))

    def rows(self):
        """Linhas (t, x, δ, lhs, rhs, rhs_frozen) da tabela de gaps."""
        for (t, x), a, b, c in zip(self.sample_points, self.lhs, self.rhs, self.rhs_frozen):
            yield (t, x, self.delta, a, b, c)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sample_points': [list(p) for p in self.sample_points],
            'lhs': list(self.lhs),
            'rhs': list(self.rhs),
            'rhs_frozen': list(self.rhs_frozen),
            'delta': self.delta,
            'max_abs_gap': self.max_abs_gap,
            'max_abs_gap_frozen': self.max_abs_gap_frozen,
            'grid_params': dict(self.grid_params),
        }


@dataclass(frozen=True)
class RegularityReport:
    """Razões de regularidade da função valor em x, em t e de crescimento."""

    lip_x_ratio: float
    holder_t_ratio: float
    growth_ratio: float

    def to_dict(self) -> Dict[str, float]:
        return {
            'lip_x_ratio': self.lip_x_ratio,
            'holder_t_ratio': self.holder_t_ratio,
            'growth_ratio': self.growth_ratio,
        }


@dataclass
class PenaltyLadderReport:
    """
    Família penalizada contra a solução refletida.

    monotone: valores não decrescentes em n em todos os pontos
    bounded: nenhum valor penalizado excede o refletido
    compact_gaps: sup (u - u_n) restrito a [t0, T] × compact_window
    """

    penalties: List[float]
    gaps: List[float]
    initial_values: List[float]
    reference_value: float
    monotone: bool
    bounded: bool
    compact_window: Optional[Tuple[float, float]] = None
    compact_gaps: List[float] = field(default_factory=list)

    def gap(self, n_penalty: float) -> Optional[float]:
        for n, g in zip(self.penalties, self.gaps):
            if n == n_penalty:
                return g
        return None

    @property
    def uniform_on_compact(self) -> bool:
        """Gaps na janela compacta não crescentes em n e estritamente menores no fim."""
        g = self.compact_gaps
        if len(g) < 2:
            return True
        steps_ok = all(b <= a + 1e-10 for a, b in zip(g, g[1:]))
        return steps_ok and (g[-1] < g[0] or g[0] == 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'penalties': list(self.penalties),
            'gaps': list(self.gaps),
            'initial_values': list(self.initial_values),
            'reference_value': self.reference_value,
            'monotone': self.monotone,
            'bounded': self.bounded,
            'compact_window': (list(self.compact_window)
                               if self.compact_window is not None else None),
            'compact_gaps': list(self.compact_gaps),
        }
