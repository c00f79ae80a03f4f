# -*- coding: utf-8 -*-
"""
PathBundle - Conjunto de caminhos de Euler-Maruyama do sistema controlado.
"""

from typing import Any, Dict, Iterator, Tuple
from dataclasses import dataclass

import numpy as np

from src.utils.exceptions import IndexOutOfRange


@dataclass(frozen=True, eq=False)
class PathBundle:
    """
    Caminhos simulados com os incrementos brownianos e controles usados.

    Formas:
        times (Nt+1,)   states (M, Nt+1, n)
        brownian_increments (M, Nt, d)   controls_used (M, Nt, k)
    """

    times: np.ndarray
    states: np.ndarray
    brownian_increments: np.ndarray
    controls_used: np.ndarray
    seed: int
    problem_name: str = ''

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[-1] - self.times[0]) / self.n_steps

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0, 0].copy()

    def window(self, i0: int) -> 'PathBundle':
        """Sub-conjunto a partir do passo i0 (mesmos caminhos e incrementos)."""
        if not 0 <= i0 < self.n_steps:
            raise IndexOutOfRange(f"Passo {i0} fora de [0, {self.n_steps})")
        return PathBundle(
            times=self.times[i0:],
            states=self.states[:, i0:],
            brownian_increments=self.brownian_increments[:, i0:],
            controls_used=self.controls_used[:, i0:],
            seed=self.seed,
            problem_name=self.problem_name,
        )

    def rows(self) -> Iterator[Tuple[Any, ...]]:
        """Linhas (path_id, step, t, x…) para exportação."""
        for p in range(self.n_paths):
            for i, t in enumerate(self.times):
                yield (p, i, float(t), *self.states[p, i].tolist())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'problem': self.problem_name,
            'seed': self.seed,
            'n_paths': self.n_paths,
            'n_steps': self.n_steps,
            't0': self.t0,
            't1': self.t1,
        }
