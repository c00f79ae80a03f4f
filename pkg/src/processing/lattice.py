# -*- coding: utf-8 -*-
"""
Construção do lattice trinomial e operações sobre seus núcleos.

Funcionalidades:
- build_lattice: casamento de momentos por controle, fronteira refletora
- expectation / conditional_expectation: esperança condicional de um passo
- increment_regression: Z = E[Y_{i+1}·ΔW]/Δt a partir dos incrementos
- sample_chain: amostragem de caminhos da cadeia (Philox com semente)
- dump_lattice_csv: exportação dos núcleos para depuração
"""

from typing import Iterator, Optional, Tuple, Union
from functools import lru_cache
import logging

import numpy as np

from src.models.lattice import Lattice, LatticeStep
from src.models.problem import ProblemSpec
from src.processing.persistence import write_csv
from src.utils.exceptions import (
    CFLViolation, DegenerateDomain, IndexOutOfRange, InvalidParams,
    NonFiniteCoefficient, ShapeMismatch,
)
from src.utils.validators import CFL_SLACK, LATTICE_CFL_LIMIT, required_substeps

logger = logging.getLogger(__name__)

MIN_INTERVALS = 4
KERNEL_CACHE_SIZE = 16

Control = Union[int, np.ndarray]


# ========== NÚCLEOS ==========

def step_kernels(spec: ProblemSpec, t: float, dt: float, x_grid: np.ndarray,
                 controls: np.ndarray) -> LatticeStep:
    """
    Núcleos trinomiais de um passo para todos os controles.

    p_up + p_down = (σ²Δt + b²Δt²)/Δx² e p_up - p_down = bΔt/Δx, de modo que
    média e variância do incremento são exatas. Onde o estêncil centrado
    daria probabilidade negativa usa-se o estêncil upwind.

    Raises:
        NonFiniteCoefficient: b ou σ não finitos
        CFLViolation: σ²Δt/Δx² + |b|Δt/Δx > 1
    """
    m, J = len(controls), len(x_grid)
    dx = float(x_grid[1] - x_grid[0])
    drift = np.empty((m, J))
    sigma = np.empty((m, J, spec.brownian_dim))
    for k, v in enumerate(controls):
        drift[k] = spec.drift_1d(t, x_grid, v)
        sigma[k] = spec.diffusion_1d(t, x_grid, v)
    if not np.all(np.isfinite(drift)):
        raise NonFiniteCoefficient('drift', (t,))
    if not np.all(np.isfinite(sigma)):
        raise NonFiniteCoefficient('diffusion', (t,))

    s2 = np.sum(sigma ** 2, axis=-1)
    ratio = s2 * dt / dx ** 2 + np.abs(drift) * dt / dx
    if ratio.max() > LATTICE_CFL_LIMIT * (1.0 + CFL_SLACK):
        control, node = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        raise CFLViolation(int(node), int(control), float(ratio.max()), LATTICE_CFL_LIMIT)

    mean = drift * dt / dx
    second = (s2 * dt + (drift * dt) ** 2) / dx ** 2
    p_up = 0.5 * (second + mean)
    p_down = 0.5 * (second - mean)
    upwind = (p_up < 0.0) | (p_down < 0.0)
    p_up = np.where(upwind, np.maximum(mean, 0.0), p_up)
    p_down = np.where(upwind, np.maximum(-mean, 0.0), p_down)
    p_mid = 1.0 - p_up - p_down

    # Fronteira refletora: a massa que sairia fica no nó de borda.
    p_mid[:, 0] += p_down[:, 0]
    p_down[:, 0] = 0.0
    p_mid[:, -1] += p_up[:, -1]
    p_up[:, -1] = 0.0

    p_mid = np.where((p_mid < 0.0) & (p_mid > -CFL_SLACK), 0.0, p_mid)
    return LatticeStep(p_down=p_down, p_mid=p_mid, p_up=p_up, drift=drift, sigma=sigma)


def build_lattice(spec: ProblemSpec, t0: float, t1: float, Nt: int,
                  x_lo: float, x_hi: float, Nx: int,
                  substeps: Optional[int] = None,
                  control_count: Optional[int] = None) -> Lattice:
    """
    Constrói a cadeia de Markov trinomial sobre [t0, t1] × [x_lo, x_hi].

    Args:
        spec: Problema com state_dim = 1
        t0, t1: Janela de tempo (t0 < t1 ≤ T)
        Nt: Passos de relatório
        x_lo, x_hi: Extremos do domínio
        Nx: Intervalos espaciais (≥ 4)
        substeps: Subpassos por passo de relatório; None escolhe o menor
            valor admissível
        control_count: Pontos por eixo na discretização de U (caixas)

    Returns:
        Lattice com Nt·substeps passos finos

    Raises:
        DegenerateDomain: x_hi ≤ x_lo, Nx < 4 ou janela vazia
        CFLViolation: subpassos insuficientes
    """
    if spec.state_dim != 1:
        raise InvalidParams(f"Lattice requer state_dim = 1, recebido {spec.state_dim}")
    if not x_hi > x_lo or Nx < MIN_INTERVALS:
        raise DegenerateDomain(f"Domínio degenerado: [{x_lo}, {x_hi}] com Nx={Nx}")
    if Nt < 1 or not t1 > t0:
        raise DegenerateDomain(f"Janela de tempo degenerada: [{t0}, {t1}], Nt={Nt}")
    if t0 < 0.0 or t1 > spec.horizon * (1.0 + 1e-12):
        raise InvalidParams(f"Janela [{t0}, {t1}] fora de [0, {spec.horizon}]")

    if substeps is None:
        substeps = required_substeps(spec, t0, t1, Nt, x_lo, x_hi, Nx,
                                     scheme='lattice', control_count=control_count)
    if substeps < 1:
        raise InvalidParams(f"substeps deve ser ≥ 1, recebido {substeps}")

    x_grid = np.linspace(x_lo, x_hi, Nx + 1)
    t_grid = np.linspace(t0, t1, Nt * substeps + 1)
    controls = spec.control_grid(control_count)
    dt = (t1 - t0) / (Nt * substeps)

    @lru_cache(maxsize=KERNEL_CACHE_SIZE)
    def kernels(i: int) -> LatticeStep:
        return step_kernels(spec, float(t_grid[i]), dt, x_grid, controls)

    # Valida todos os passos na construção; os núcleos são recalculados sob
    # demanda depois.
    for i in range(len(t_grid) - 1):
        step_kernels(spec, float(t_grid[i]), dt, x_grid, controls)

    lattice = Lattice(
        t_grid=t_grid,
        x_grid=x_grid,
        control_grid=controls,
        substeps=int(substeps),
        problem_name=spec.name,
        step_kernels=kernels,
    )
    logger.debug("✅ %r construído (Δt=%.3g, Δx=%.3g)", lattice, dt, lattice.dx)
    return lattice


# ========== ESPERANÇAS ==========

def _check_field(lattice: Lattice, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != (lattice.n_nodes,):
        raise ShapeMismatch(f"Campo com forma {field.shape}, esperado ({lattice.n_nodes},)")
    return field


def expectation(lattice: Lattice, i: int, j: int, m: int, field: np.ndarray) -> float:
    """
    E[field(X_{i+1}) | X_i = x_j] sob o controle m.

    Raises:
        IndexOutOfRange: i, j ou m fora da grade
    """
    field = _check_field(lattice, field)
    probs, dests = lattice.kernel(i, j, m)
    return float(sum(p * field[d] for p, d in zip(probs, dests)))


def conditional_expectation(lattice: Lattice, i: int, control: Control,
                            field: np.ndarray) -> np.ndarray:
    """Esperança de um passo em todos os nós; retorna (J,)."""
    field = _check_field(lattice, field)
    p_down, p_mid, p_up, _, _ = lattice.select(i, control)
    return (p_down * field[lattice.down_index] + p_mid * field
            + p_up * field[lattice.up_index])


def increment_regression(lattice: Lattice, i: int, control: Control,
                         field: np.ndarray) -> np.ndarray:
    """
    Z_j = E[field(X_{i+1})·ΔW | X_i = x_j] / Δt, com ΔW recuperado do
    incremento do estado: ΔW = σᵀ(x_dest - x_j - bΔt)/|σ|².

    Returns:
        Array (J, d); zero onde σ = 0
    """
    field = _check_field(lattice, field)
    p_down, p_mid, p_up, drift, sigma = lattice.select(i, control)
    x = lattice.x_grid
    dt = lattice.dt
    shift = x + drift * dt
    covariance = (p_down * field[lattice.down_index] * (x[lattice.down_index] - shift)
                  + p_mid * field * (x - shift)
                  + p_up * field[lattice.up_index] * (x[lattice.up_index] - shift)) / dt
    s2 = np.sum(sigma ** 2, axis=-1)
    scale = np.divide(covariance, s2, out=np.zeros_like(covariance), where=s2 > 0)
    return sigma * scale[:, None]


# ========== AMOSTRAGEM ==========

def control_at(control: Optional[Control], i: int) -> Control:
    """Controle do passo i: índice fixo, linha de uma tabela (N, J) ou política (J,)."""
    if control is None:
        return 0
    if np.ndim(control) == 2:
        return control[i]
    return control


def iterate_chain(lattice: Lattice, control: Optional[Control], j0: int,
                  paths: int, seed: int = 0,
                  i0: int = 0) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Percorre caminhos da cadeia a partir do nó j0 no passo fino i0.

    Gera (i, nós no passo i) para i = i0, …, n_steps sem guardar a
    trajetória inteira.

    Args:
        control: índice fixo, tabela de política (n_steps, J) ou None (controle 0)
        j0: Nó inicial
        paths: Número de caminhos
        seed: Chave do gerador Philox
    """
    if not 0 <= j0 < lattice.n_nodes:
        raise IndexOutOfRange(f"Nó inicial {j0} fora de [0, {lattice.n_nodes})")
    if not 0 <= i0 <= lattice.n_steps:
        raise IndexOutOfRange(f"Passo inicial {i0} fora de [0, {lattice.n_steps}]")
    if paths < 1:
        raise InvalidParams(f"paths deve ser ≥ 1, recebido {paths}")

    rng = np.random.Generator(np.random.Philox(key=seed))
    current = np.full(paths, j0, dtype=int)
    down, up = lattice.down_index, lattice.up_index
    yield i0, current
    for i in range(i0, lattice.n_steps):
        p_down, p_mid, _, _, _ = lattice.select(i, control_at(control, i))
        u = rng.random(paths)
        lower = p_down[current]
        middle = lower + p_mid[current]
        current = np.where(u < lower, down[current],
                           np.where(u < middle, current, up[current]))
        yield i + 1, current


def sample_chain(lattice: Lattice, control: Optional[Control], j0: int,
                 paths: int, seed: int = 0, i0: int = 0) -> np.ndarray:
    """
    Amostra caminhos da cadeia; retorna (paths, n_steps - i0 + 1) índices de nó.
    """
    return np.stack([nodes for _, nodes in
                     iterate_chain(lattice, control, j0, paths, seed, i0)], axis=1)


# ========== EXPORTAÇÃO ==========

def dump_lattice_csv(lattice: Lattice, file_path: str, step: int = 0) -> bool:
    """Exporta os núcleos de um passo: (step, t, node, x, control, p_down, p_mid, p_up)."""
    s = lattice.step(step)
    t = float(lattice.t_grid[step])
    rows = [
        (step, t, j, float(lattice.x_grid[j]), m,
         float(s.p_down[m, j]), float(s.p_mid[m, j]), float(s.p_up[m, j]))
        for m in range(lattice.n_controls)
        for j in range(lattice.n_nodes)
    ]
    header = ('step', 't', 'node', 'x', 'control', 'p_down', 'p_mid', 'p_up')
    return write_csv(file_path, header, rows)
