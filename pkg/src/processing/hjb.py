# -*- coding: utf-8 -*-
"""
Diferenças finitas explícitas para a desigualdade variacional HJB com
obstáculo em uma dimensão de estado.

Em cada subpasso e nó:
    candidato_v = u + Δt·[½σ²D²u + b·Du + g(t, x, u, Du·σ, v)]
    u ← max(max_v candidato_v, h)         (ou passo penalizado)

Nas bordas usa-se o nó fantasma u_fantasma = 2u_borda - u_vizinho: a
segunda diferença é nula e o gradiente vira a diferença unilateral.
"""

from typing import Optional, Tuple
import logging

import numpy as np

from src.models.lattice import Lattice
from src.models.problem import ProblemSpec
from src.models.solution import RBSDESolution, ValueField
from src.processing.persistence import write_csv
from src.processing.rbsde import StepRule, penalize, reflect
from src.utils.exceptions import (
    CFLViolation, DegenerateDomain, InvalidParams, NonFiniteValue, TerminalObstacleConflict,
)
from src.utils.validators import CFL_SLACK, HJB_CFL_LIMIT, required_substeps

logger = logging.getLogger(__name__)

ACTIVE_TOLERANCE = 1e-10
UNIFORM_TOLERANCE = 1e-9

# Fração final do horizonte excluída do resíduo (camada da quina terminal)
TERMINAL_LAYER = 0.1


# ========== OPERADOR ==========

def _derivatives(u: np.ndarray, dx: float) -> Tuple[np.ndarray, np.ndarray]:
    """(D¹u centrada, D²u) com nós fantasmas de extrapolação linear."""
    ext = np.concatenate(([2.0 * u[0] - u[1]], u, [2.0 * u[-1] - u[-2]]))
    first = (ext[2:] - ext[:-2]) / (2.0 * dx)
    second = (ext[2:] - 2.0 * u + ext[:-2]) / dx ** 2
    return first, second


def hamiltonian(spec: ProblemSpec, t: float, x_grid: np.ndarray, u: np.ndarray,
                controls: np.ndarray, dt: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    sup_v {𝓛(t, x, v)u + g(t, x, u, Du·σ, v)} em cada nó.

    Com `dt`, verifica também a CFL σ²Δt/Δx² + |b|Δt/(2Δx) ≤ 1/2.

    Returns:
        (valor do sup (J,), índice do controle maximizador (J,))
    """
    dx = float(x_grid[1] - x_grid[0])
    first, second = _derivatives(u, dx)
    best = np.full(len(x_grid), -np.inf)
    arg = np.zeros(len(x_grid), dtype=int)
    for m, v in enumerate(controls):
        b = spec.drift_1d(t, x_grid, v)
        sigma = spec.diffusion_1d(t, x_grid, v)
        s2 = np.sum(sigma ** 2, axis=1)
        if dt is not None:
            ratio = s2 * dt / dx ** 2 + np.abs(b) * dt / (2.0 * dx)
            if ratio.max() > HJB_CFL_LIMIT * (1.0 + CFL_SLACK):
                raise CFLViolation(int(np.argmax(ratio)), m, float(ratio.max()), HJB_CFL_LIMIT)
        g = spec.driver_1d(t, x_grid, u, first[:, None] * sigma, v)
        value = 0.5 * s2 * second + b * first + g
        better = value > best
        best = np.where(better, value, best)
        arg = np.where(better, m, arg)
    return best, arg


# ========== MARCHA NO TEMPO ==========

def _check_grids(t_grid: np.ndarray, x_grid: np.ndarray):
    if len(x_grid) < 3 or not x_grid[-1] > x_grid[0]:
        raise DegenerateDomain(f"Grade espacial degenerada com {len(x_grid)} nós")
    if len(t_grid) < 2 or not t_grid[-1] > t_grid[0]:
        raise DegenerateDomain(f"Grade de tempo degenerada com {len(t_grid)} instantes")
    for label, grid in (('x', x_grid), ('t', t_grid)):
        steps = np.diff(grid)
        if np.max(np.abs(steps - steps[0])) > UNIFORM_TOLERANCE * max(1.0, abs(steps[0])):
            raise InvalidParams(f"Grade {label} não uniforme")


def _march(spec: ProblemSpec, t_grid: np.ndarray, x_grid: np.ndarray, rule: StepRule,
           substeps: int, controls: np.ndarray) -> ValueField:
    Nt, J = len(t_grid) - 1, len(x_grid)
    dt = float(t_grid[-1] - t_grid[0]) / (Nt * substeps)
    fine_times = np.linspace(t_grid[0], t_grid[-1], Nt * substeps + 1)

    u_out = np.empty((Nt + 1, J))
    h_out = np.empty((Nt + 1, J))
    arg_out = np.full((Nt + 1, J), -1, dtype=int)

    u = spec.terminal_1d(x_grid)
    h = spec.obstacle_1d(float(t_grid[-1]), x_grid)
    if np.any(u < h - ACTIVE_TOLERANCE):
        raise TerminalObstacleConflict(f"Φ abaixo de h(T) em {spec.name}")
    u_out[Nt], h_out[Nt] = u, h

    for f in range(Nt * substeps - 1, -1, -1):
        t = float(fine_times[f])
        sup, arg = hamiltonian(spec, t, x_grid, u, controls, dt=dt)
        h = spec.obstacle_1d(t, x_grid)
        u, _ = rule(u + dt * sup, h)
        if not np.all(np.isfinite(u)):
            raise NonFiniteValue(f"Campo não finito em t={t:.6g} ({spec.name})")
        if f % substeps == 0:
            k = f // substeps
            u_out[k], h_out[k], arg_out[k] = u, h, arg

    return ValueField(
        t_grid=np.asarray(t_grid, dtype=float),
        x_grid=np.asarray(x_grid, dtype=float),
        u=u_out,
        h_field=h_out,
        active_set=np.abs(u_out - h_out) <= ACTIVE_TOLERANCE,
        argmax_control=arg_out,
        control_grid=controls,
        problem_name=spec.name,
        substeps=substeps,
    )


def _resolve_substeps(spec: ProblemSpec, t_grid: np.ndarray, x_grid: np.ndarray,
                      substeps: Optional[int], control_count: Optional[int]) -> int:
    if substeps is None:
        return required_substeps(spec, float(t_grid[0]), float(t_grid[-1]), len(t_grid) - 1,
                                 float(x_grid[0]), float(x_grid[-1]), len(x_grid) - 1,
                                 scheme='hjb', control_count=control_count)
    if substeps < 1:
        raise InvalidParams(f"substeps deve ser ≥ 1, recebido {substeps}")
    return int(substeps)


def solve_hjb_fd(spec: ProblemSpec, t_grid: np.ndarray, x_grid: np.ndarray,
                 substeps: Optional[int] = None,
                 control_count: Optional[int] = None) -> ValueField:
    """
    Resolve min(u - h, -∂ₜu - sup_v{𝓛u + g}) = 0, u(T, ·) = Φ.

    Args:
        spec: Problema com state_dim = 1
        t_grid: Instantes de relatório (uniformes)
        x_grid: Nós espaciais (uniformes)
        substeps: Subpassos explícitos por passo de relatório; None escolhe
            o menor valor admissível
        control_count: Pontos por eixo na discretização de U

    Raises:
        CFLViolation: subpassos insuficientes
        NonFiniteValue: campo deixou de ser finito
    """
    if spec.state_dim != 1:
        raise InvalidParams(f"Diferenças finitas requerem state_dim = 1 ({spec.state_dim})")
    t_grid, x_grid = np.asarray(t_grid, dtype=float), np.asarray(x_grid, dtype=float)
    _check_grids(t_grid, x_grid)
    substeps = _resolve_substeps(spec, t_grid, x_grid, substeps, control_count)
    field = _march(spec, t_grid, x_grid, reflect, substeps, spec.control_grid(control_count))
    logger.debug("✅ HJB (%s): %d×%d, %d subpassos", spec.name,
                 len(t_grid) - 1, len(x_grid) - 1, substeps)
    return field


def solve_penalized_hjb(spec: ProblemSpec, t_grid: np.ndarray, x_grid: np.ndarray,
                        n_penalty: float, substeps: Optional[int] = None,
                        control_count: Optional[int] = None) -> ValueField:
    """HJB com driver g + n(u - h)⁻ resolvido de forma semi-implícita; sem projeção."""
    if spec.state_dim != 1:
        raise InvalidParams(f"Diferenças finitas requerem state_dim = 1 ({spec.state_dim})")
    t_grid, x_grid = np.asarray(t_grid, dtype=float), np.asarray(x_grid, dtype=float)
    _check_grids(t_grid, x_grid)
    substeps = _resolve_substeps(spec, t_grid, x_grid, substeps, control_count)
    dt = float(t_grid[-1] - t_grid[0]) / ((len(t_grid) - 1) * substeps)
    return _march(spec, t_grid, x_grid, penalize(n_penalty, dt), substeps,
                  spec.control_grid(control_count))


# ========== RESÍDUO ==========

def residual_check(field: ValueField, spec: ProblemSpec, t_max: Optional[float] = None) -> float:
    """
    max |min(u - h, -∂ₜu - sup_v{𝓛u + g})| nos nós interiores em x com
    t < t_max.

    ∂ₜu por diferença progressiva na grade de relatório; derivadas em x
    centradas. O padrão de t_max exclui a fração TERMINAL_LAYER final do
    horizonte, onde a quina de Φ domina ∂ₜ²u.

    Args:
        t_max: Fim (exclusivo) da janela; passe o último instante da grade
            para incluir todas as camadas
    """
    t0, t1 = float(field.t_grid[0]), float(field.t_grid[-1])
    t_max = t1 - TERMINAL_LAYER * (t1 - t0) if t_max is None else float(t_max)
    worst = 0.0
    for i in range(len(field.t_grid) - 1):
        t = float(field.t_grid[i])
        if not t < t_max - 1e-12:
            continue
        u = field.u[i]
        sup, _ = hamiltonian(spec, t, field.x_grid, u, field.control_grid)
        time_term = -(field.u[i + 1] - u) / field.dt
        r = np.minimum(u - field.h_field[i], time_term - sup)[1:-1]
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


# ========== CONVERSÃO / EXPORTAÇÃO ==========

def value_field_from_lattice(sol: RBSDESolution, lattice: Lattice,
                             problem_name: str = '') -> ValueField:
    """ValueField nos instantes de relatório a partir de uma solução em lattice."""
    idx = lattice.report_indices
    u = sol.Y[idx]
    h = sol.obstacle_S[idx]
    arg = np.full(u.shape, -1, dtype=int)
    if sol.policy is not None:
        arg[:-1] = sol.policy[idx[:-1]]
    elif sol.control is not None and np.ndim(sol.control) == 0:
        arg[:-1] = int(sol.control)
    return ValueField(
        t_grid=lattice.t_grid[idx],
        x_grid=lattice.x_grid,
        u=u,
        h_field=h,
        active_set=np.abs(u - h) <= ACTIVE_TOLERANCE,
        argmax_control=arg,
        control_grid=lattice.control_grid,
        problem_name=problem_name or lattice.problem_name,
        substeps=lattice.substeps,
    )


def dump_field_csv(field: ValueField, file_path: str) -> bool:
    """Exporta (t, x, u, h, active_flag, argmax_control)."""
    header = ('t', 'x', 'u', 'h', 'active_flag', 'argmax_control')
    return write_csv(file_path, header, field.rows())
