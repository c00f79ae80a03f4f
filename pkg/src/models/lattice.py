# -*- coding: utf-8 -*-
"""
Lattice - Cadeia de Markov trinomial recombinante que aproxima o sistema
controlado em uma dimensão de estado.

Os núcleos de transição são calculados sob demanda, passo a passo, e
mantidos em cache; o lattice é imutável após a construção.
"""

from typing import Any, Callable, Dict, Tuple
from dataclasses import dataclass, field

import numpy as np

from src.utils.exceptions import IndexOutOfRange


@dataclass(frozen=True, eq=False)
class LatticeStep:
    """Núcleos de um passo fino i para todos os controles e nós (m, J)."""

    p_down: np.ndarray
    p_mid: np.ndarray
    p_up: np.ndarray
    drift: np.ndarray     # (m, J)
    sigma: np.ndarray     # (m, J, d)


@dataclass(frozen=True, eq=False)
class Lattice:
    """
    Grade tempo-estado com núcleos de um passo por controle.

    Destinos de cada nó j: (j-1, j, j+1); nas bordas a massa que sairia do
    domínio é atribuída ao próprio nó de borda (fronteira refletora).
    """

    t_grid: np.ndarray            # N+1 instantes finos
    x_grid: np.ndarray            # J = Nx+1 nós
    control_grid: np.ndarray      # (m, k)
    substeps: int
    problem_name: str
    step_kernels: Callable[[int], LatticeStep] = field(repr=False)

    # ========== DIMENSÕES ==========

    @property
    def n_steps(self) -> int:
        return len(self.t_grid) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.x_grid)

    @property
    def n_controls(self) -> int:
        return len(self.control_grid)

    @property
    def dt(self) -> float:
        return float(self.t_grid[-1] - self.t_grid[0]) / self.n_steps

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def t0(self) -> float:
        return float(self.t_grid[0])

    @property
    def t1(self) -> float:
        return float(self.t_grid[-1])

    @property
    def report_indices(self) -> np.ndarray:
        """Índices finos dos instantes de relatório (a cada `substeps`)."""
        return np.arange(0, self.n_steps + 1, self.substeps)

    @property
    def report_times(self) -> np.ndarray:
        return self.t_grid[self.report_indices]

    @property
    def down_index(self) -> np.ndarray:
        return np.maximum(np.arange(self.n_nodes) - 1, 0)

    @property
    def up_index(self) -> np.ndarray:
        return np.minimum(np.arange(self.n_nodes) + 1, self.n_nodes - 1)

    # ========== NÚCLEOS ==========

    def step(self, i: int) -> LatticeStep:
        """Núcleos do passo fino i (0 ≤ i < n_steps)."""
        if not 0 <= i < self.n_steps:
            raise IndexOutOfRange(f"Passo {i} fora de [0, {self.n_steps})")
        return self.step_kernels(i)

    def kernel(self, i: int, j: int, m: int) -> Tuple[Tuple[float, float, float],
                                                      Tuple[int, int, int]]:
        """
        Tripla (p_down, p_mid, p_up) e destinos do nó j sob o controle m.

        Raises:
            IndexOutOfRange: índice fora da grade
        """
        if not 0 <= j < self.n_nodes:
            raise IndexOutOfRange(f"Nó {j} fora de [0, {self.n_nodes})")
        if not 0 <= m < self.n_controls:
            raise IndexOutOfRange(f"Controle {m} fora de [0, {self.n_controls})")
        s = self.step(i)
        probs = (float(s.p_down[m, j]), float(s.p_mid[m, j]), float(s.p_up[m, j]))
        dests = (int(self.down_index[j]), j, int(self.up_index[j]))
        return probs, dests

    def select(self, i: int, control) -> Tuple[np.ndarray, np.ndarray, np.ndarray,
                                               np.ndarray, np.ndarray]:
        """
        Núcleos do passo i para um controle fixo (int) ou uma política por
        nó (array de índices com J entradas).

        Returns:
            (p_down, p_mid, p_up, drift, sigma) com formas (J,), ..., (J, d)
        """
        s = self.step(i)
        if np.isscalar(control) or np.ndim(control) == 0:
            m = int(control)
            if not 0 <= m < self.n_controls:
                raise IndexOutOfRange(f"Controle {m} fora de [0, {self.n_controls})")
            return s.p_down[m], s.p_mid[m], s.p_up[m], s.drift[m], s.sigma[m]
        policy = np.asarray(control, dtype=int)
        if policy.shape != (self.n_nodes,):
            raise IndexOutOfRange(f"Política com forma {policy.shape}, esperado ({self.n_nodes},)")
        if policy.min() < 0 or policy.max() >= self.n_controls:
            raise IndexOutOfRange("Política com índice de controle fora da grade")
        cols = np.arange(self.n_nodes)
        return (s.p_down[policy, cols], s.p_mid[policy, cols], s.p_up[policy, cols],
                s.drift[policy, cols], s.sigma[policy, cols])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'problem': self.problem_name,
            't0': self.t0,
            't1': self.t1,
            'n_steps': self.n_steps,
            'substeps': self.substeps,
            'x_lo': float(self.x_grid[0]),
            'x_hi': float(self.x_grid[-1]),
            'n_nodes': self.n_nodes,
            'n_controls': self.n_controls,
        }

    def __repr__(self) -> str:
        return (f"Lattice(problem={self.problem_name}, steps={self.n_steps}, "
                f"nodes={self.n_nodes}, controls={self.n_controls})")
