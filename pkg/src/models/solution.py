# -*- coding: utf-8 -*-
"""
Modelos de saída dos solvers.

- RBSDESolution: campos discretos (Y, Z, K) do BSDE refletido
- ValueField: função valor u(t_i, x_j) com obstáculo, conjunto ativo e
  controle ótimo por nó
"""

from typing import Any, Dict, Iterator, Optional, Tuple, Union
from dataclasses import dataclass

import numpy as np

from src.utils.exceptions import MisalignedWindow

ALIGN_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class RBSDESolution:
    """
    Solução discreta do BSDE refletido.

    Indexação:
        modo 'lattice': Y, dK, obstacle_S (N+1, J); Z (N+1, J, d)
        modo 'mc':      Y, dK, obstacle_S (M, N+1); Z (M, N+1, d)

    dK guarda o empurrão de reflexão de cada passo; K é a soma acumulada ao
    longo do tempo com K(início) = 0.
    """

    Y: np.ndarray
    Z: np.ndarray
    dK: np.ndarray
    obstacle_S: np.ndarray
    times: np.ndarray
    mode: str = 'lattice'
    x_grid: Optional[np.ndarray] = None
    control: Union[int, np.ndarray, None] = None
    substeps: int = 1

    @property
    def time_axis(self) -> int:
        return 0 if self.mode == 'lattice' else 1

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[-1] - self.times[0]) / self.n_steps

    @property
    def K(self) -> np.ndarray:
        """K_i = Σ_{k<i} dK_k (acumulado ao longo do tempo)."""
        dK = np.moveaxis(self.dK, self.time_axis, 0)
        K = np.zeros_like(dK)
        np.cumsum(dK[:-1], axis=0, out=K[1:])
        return np.moveaxis(K, 0, self.time_axis)

    @property
    def terminal(self) -> np.ndarray:
        """ξ: fatia terminal de Y."""
        return np.take(self.Y, -1, axis=self.time_axis)

    @property
    def policy(self) -> Optional[np.ndarray]:
        """Tabela de política (N, J) quando a solução vem da otimização por nó."""
        if isinstance(self.control, np.ndarray) and self.control.ndim == 2:
            return self.control
        return None

    def initial_value(self, x: Optional[float] = None) -> float:
        """Y no instante inicial: em x (interpolado) no lattice, média no MC."""
        if self.mode == 'mc':
            return float(np.mean(self.Y[:, 0]))
        if x is None:
            raise ValueError("Informe x para soluções em lattice")
        return float(np.interp(x, self.x_grid, self.Y[0]))

    def report_slice(self) -> np.ndarray:
        """Y nos instantes de relatório (lattice), forma (Nt+1, J)."""
        return self.Y[::self.substeps]

    def rows(self) -> Iterator[Tuple[Any, ...]]:
        """Linhas (t, x, Y, Z…, K) do modo lattice nos instantes de relatório."""
        K = self.K
        for i in range(0, self.n_steps + 1, self.substeps):
            for j, x in enumerate(self.x_grid):
                yield (float(self.times[i]), float(x), float(self.Y[i, j]),
                       *self.Z[i, j].tolist(), float(K[i, j]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mode': self.mode,
            'n_steps': self.n_steps,
            'substeps': self.substeps,
            'shape': list(self.Y.shape),
            'total_reflection': float(self.dK.sum()),
            'min_gap_to_obstacle': float(np.min(self.Y - self.obstacle_S)),
        }


@dataclass(frozen=True, eq=False)
class ValueField:
    """
    Função valor na grade de relatório.

    argmax_control vale -1 no instante terminal e em nós sem controle
    registrado.
    """

    t_grid: np.ndarray
    x_grid: np.ndarray
    u: np.ndarray
    h_field: np.ndarray
    active_set: np.ndarray
    argmax_control: np.ndarray
    control_grid: np.ndarray
    problem_name: str = ''
    substeps: int = 1

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    def time_index(self, t: float) -> int:
        """
        Índice do instante t na grade de relatório.

        Raises:
            MisalignedWindow: t não pertence à grade
        """
        i = int(round((t - float(self.t_grid[0])) / self.dt))
        if not 0 <= i < len(self.t_grid) or abs(self.t_grid[i] - t) > ALIGN_TOLERANCE:
            raise MisalignedWindow(f"t={t} não pertence à grade de tempo")
        return i

    def value_at(self, t: float, x: float) -> float:
        """u(t, x) com interpolação linear em x."""
        return float(np.interp(x, self.x_grid, self.u[self.time_index(t)]))

    def rows(self) -> Iterator[Tuple[Any, ...]]:
        """Linhas (t, x, u, h, active_flag, argmax_control)."""
        for i, t in enumerate(self.t_grid):
            for j, x in enumerate(self.x_grid):
                yield (float(t), float(x), float(self.u[i, j]), float(self.h_field[i, j]),
                       int(self.active_set[i, j]), int(self.argmax_control[i, j]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'problem': self.problem_name,
            'Nt': len(self.t_grid) - 1,
            'Nx': len(self.x_grid) - 1,
            'substeps': self.substeps,
            'x_lo': float(self.x_grid[0]),
            'x_hi': float(self.x_grid[-1]),
            'active_fraction': float(np.mean(self.active_set)),
        }
