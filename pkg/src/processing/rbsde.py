# -*- coding: utf-8 -*-
"""
Solvers do BSDE refletido e quantidades de verificação.

Métodos:
- Lattice: indução retroativa com projeção sobre o obstáculo, com
  penalização semi-implícita, sem reflexão, ou com otimização por nó
- Monte Carlo: mínimos quadrados com propagação do fluxo de caixa por
  caminho e projeção sobre o obstáculo
- Comparação, estimativa a priori e estabilidade como lados computáveis
- Estabilidade conjunta no ponto inicial e no controle (caminhos acoplados)
"""

from typing import Callable, Optional, Sequence, Tuple
import dataclasses
import logging

import numpy as np

from src.models.lattice import Lattice
from src.models.paths import PathBundle
from src.models.problem import INACTIVE_OBSTACLE, ProblemSpec
from src.models.report import PenaltyLadderReport
from src.models.solution import RBSDESolution
from src.processing.forward_sim import simulate
from src.processing.lattice import (
    Control, conditional_expectation, control_at, increment_regression, iterate_chain,
)
from src.processing.persistence import write_csv
from src.utils.exceptions import (
    InvalidParams, NonFiniteDriver, ShapeMismatch, SingularRegression,
    TerminalObstacleConflict,
)

logger = logging.getLogger(__name__)

Obstacle = Callable[[float, np.ndarray], np.ndarray]
StepRule = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]

TERMINAL_TOLERANCE = 1e-12
LADDER_TOLERANCE = 1e-10
DEGENERATE_SPREAD = 1e-12
DEFAULT_BASIS_DEGREE = 3
DEFAULT_SAMPLE_PATHS = 20000

PERTURBATIONS = ('terminal', 'driver', 'obstacle')


# ========== REGRAS DE PASSO ==========

def reflect(candidate: np.ndarray, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Projeção Y = max(Ỹ, S); ΔK = Y - Ỹ."""
    Y = np.maximum(candidate, S)
    return Y, Y - candidate


def no_reflection(candidate: np.ndarray, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return candidate, np.zeros_like(candidate)


def penalize(n_penalty: float, dt: float) -> StepRule:
    """
    Passo penalizado semi-implícito resolvido em forma fechada:
    Y = A se A ≥ h, senão Y = (A + nΔt·h)/(1 + nΔt). ΔK = nΔt·(Y - h)⁻.
    """
    if not n_penalty >= 0:
        raise InvalidParams(f"n_penalty deve ser ≥ 0, recebido {n_penalty}")
    weight = n_penalty * dt

    def rule(candidate: np.ndarray, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        Y = np.where(candidate >= S, candidate, (candidate + weight * S) / (1.0 + weight))
        return Y, weight * np.maximum(S - Y, 0.0)

    return rule


# ========== LATTICE ==========

def _obstacle_row(obstacle: Obstacle, t: float, x_grid: np.ndarray) -> np.ndarray:
    value = np.asarray(obstacle(t, x_grid[:, None]), dtype=float)
    return np.broadcast_to(value, x_grid.shape).copy()


def _inactive(t: float, x: np.ndarray) -> np.ndarray:
    return np.full(x.shape[:-1], INACTIVE_OBSTACLE)


def driver_step(lattice: Lattice, spec: ProblemSpec, i: int, control: Control,
                Y_next: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ỹ = Ŷ + g(t_i, x, Ŷ, Z, v)·Δt com Ŷ = E[Y_{i+1}] e Z da regressão de
    incrementos (driver explícito em y).

    Returns:
        (Ỹ, Z) com formas (J,) e (J, d)
    """
    Y_hat = conditional_expectation(lattice, i, control, Y_next)
    Z = increment_regression(lattice, i, control, Y_next)
    v = lattice.control_grid[control]
    g = spec.driver_1d(float(lattice.t_grid[i]), lattice.x_grid, Y_hat, Z, v)
    if not np.all(np.isfinite(g)):
        raise NonFiniteDriver(f"Driver não finito no passo {i} ({spec.name})")
    return Y_hat + g * lattice.dt, Z


def _backward_induction(lattice: Lattice, spec: ProblemSpec, control: Optional[Control],
                        terminal: Optional[np.ndarray], obstacle: Optional[Obstacle],
                        rule: StepRule, optimize: bool = False) -> RBSDESolution:
    N, J, d = lattice.n_steps, lattice.n_nodes, spec.brownian_dim
    x = lattice.x_grid
    obstacle = spec.obstacle if obstacle is None else obstacle
    terminal = spec.terminal_1d(x) if terminal is None else np.asarray(terminal, dtype=float)
    if terminal.shape != (J,):
        raise ShapeMismatch(f"Terminal com forma {terminal.shape}, esperado ({J},)")

    Y = np.empty((N + 1, J))
    Z = np.zeros((N + 1, J, d))
    dK = np.zeros((N + 1, J))
    S = np.empty((N + 1, J))

    S[N] = _obstacle_row(obstacle, lattice.t1, x)
    if np.any(terminal < S[N] - TERMINAL_TOLERANCE):
        j = int(np.argmax(S[N] - terminal))
        raise TerminalObstacleConflict(
            f"Terminal {terminal[j]:.6g} abaixo do obstáculo {S[N, j]:.6g} em x={x[j]:.6g}")
    Y[N] = terminal

    policy = np.zeros((N, J), dtype=int) if optimize else None
    for i in range(N - 1, -1, -1):
        if optimize:
            candidate, Z[i] = driver_step(lattice, spec, i, 0, Y[i + 1])
            for m in range(1, lattice.n_controls):
                cand_m, Z_m = driver_step(lattice, spec, i, m, Y[i + 1])
                better = cand_m > candidate
                candidate = np.where(better, cand_m, candidate)
                Z[i][better] = Z_m[better]
                policy[i][better] = m
        else:
            candidate, Z[i] = driver_step(lattice, spec, i, control_at(control, i), Y[i + 1])
        S[i] = _obstacle_row(obstacle, float(lattice.t_grid[i]), x)
        Y[i], dK[i] = rule(candidate, S[i])

    return RBSDESolution(
        Y=Y, Z=Z, dK=dK, obstacle_S=S,
        times=lattice.t_grid,
        mode='lattice',
        x_grid=x,
        control=policy if optimize else control,
        substeps=lattice.substeps,
    )


def solve_bsde_lattice(lattice: Lattice, spec: ProblemSpec, control: Control = 0,
                       terminal: Optional[np.ndarray] = None) -> RBSDESolution:
    """BSDE sem reflexão; obstacle_S registra a barreira inativa."""
    return _backward_induction(lattice, spec, control, terminal, _inactive, no_reflection)


def solve_reflected_lattice(lattice: Lattice, spec: ProblemSpec, control: Control = 0,
                            terminal: Optional[np.ndarray] = None,
                            obstacle: Optional[Obstacle] = None) -> RBSDESolution:
    """
    BSDE refletido no lattice por projeção: Y_i = max(Ỹ_i, h(t_i, x)).

    Args:
        lattice: Lattice construído para o problema
        spec: Problema
        control: Índice fixo ou tabela de política (N, J)
        terminal: Valores terminais nos nós (padrão: Φ)
        obstacle: Função (t, x) → h (padrão: h do problema)

    Raises:
        TerminalObstacleConflict: terminal abaixo do obstáculo em t1
        NonFiniteDriver: g não finito
    """
    sol = _backward_induction(lattice, spec, control, terminal, obstacle, reflect)
    logger.debug("✅ BSDE refletido (%s): massa de reflexão %.6g", spec.name, sol.dK.sum())
    return sol


def solve_penalized_lattice(lattice: Lattice, spec: ProblemSpec, control: Control = 0,
                            terminal: Optional[np.ndarray] = None,
                            obstacle: Optional[Obstacle] = None,
                            n_penalty: float = 1.0) -> RBSDESolution:
    """BSDE penalizado; K acumula a massa de penalidade nΔt·(Y - h)⁻."""
    rule = penalize(n_penalty, lattice.dt)
    return _backward_induction(lattice, spec, control, terminal, obstacle, rule)


def solve_optimal_lattice(lattice: Lattice, spec: ProblemSpec,
                          terminal: Optional[np.ndarray] = None,
                          obstacle: Optional[Obstacle] = None,
                          n_penalty: Optional[float] = None) -> RBSDESolution:
    """
    Função valor no lattice: em cada passo e nó, máximo de Ỹ sobre a grade de
    controles antes da projeção (ou da penalização, se n_penalty for dado).

    O controle ótimo fica em `solution.policy` (N, J).
    """
    rule = reflect if n_penalty is None else penalize(n_penalty, lattice.dt)
    sol = _backward_induction(lattice, spec, None, terminal, obstacle, rule, optimize=True)
    logger.debug("✅ Valor ótimo no lattice (%s, %d controles)", spec.name, lattice.n_controls)
    return sol


def penalty_ladder(lattice: Lattice, spec: ProblemSpec, penalties: Sequence[float],
                   x0: float, control: Control = 0, optimize: bool = False,
                   reference: Optional[RBSDESolution] = None,
                   window: Optional[Tuple[float, float]] = None) -> PenaltyLadderReport:
    """
    Resolve a família penalizada e compara com a solução refletida.

    Args:
        window: Intervalo compacto [a, b] em x; os gaps sup (u - u_n) sobre
            [t0, T] × [a, b] vão para `compact_gaps`

    Returns:
        PenaltyLadderReport com gaps em norma do sup, monotonicidade em n e
        limitação pela solução refletida

    Raises:
        InvalidParams: janela sem nós do lattice
    """
    if reference is None:
        reference = (solve_optimal_lattice(lattice, spec) if optimize
                     else solve_reflected_lattice(lattice, spec, control))
    compact = None
    if window is not None:
        a, b = float(window[0]), float(window[1])
        compact = (lattice.x_grid >= a) & (lattice.x_grid <= b)
        if not compact.any():
            raise InvalidParams(f"Janela [{a}, {b}] sem nós do lattice")
    gaps, values, compact_gaps = [], [], []
    monotone, bounded = True, True
    previous = None
    for n in penalties:
        sol = (solve_optimal_lattice(lattice, spec, n_penalty=n) if optimize
               else solve_penalized_lattice(lattice, spec, control, n_penalty=n))
        gaps.append(float(np.max(np.abs(reference.Y - sol.Y))))
        if compact is not None:
            compact_gaps.append(float(np.max(reference.Y[:, compact] - sol.Y[:, compact])))
        values.append(sol.initial_value(x0))
        bounded &= bool(np.all(sol.Y <= reference.Y + LADDER_TOLERANCE))
        if previous is not None:
            monotone &= bool(np.all(sol.Y >= previous - LADDER_TOLERANCE))
        previous = sol.Y
    report = PenaltyLadderReport(
        penalties=[float(n) for n in penalties],
        gaps=gaps,
        initial_values=values,
        reference_value=reference.initial_value(x0),
        monotone=monotone,
        bounded=bounded,
        compact_window=None if window is None else (float(window[0]), float(window[1])),
        compact_gaps=compact_gaps,
    )
    logger.info("🔬 Penalização (%s): gaps %s", spec.name, ["%.3g" % g for g in gaps])
    return report


# ========== MONTE CARLO ==========

def _design_matrix(state: np.ndarray, degree: int) -> np.ndarray:
    """Constante + potências 1..degree de cada coordenada padronizada."""
    columns = [np.ones(len(state))]
    for c in range(state.shape[1]):
        col = state[:, c]
        mu, sd = float(col.mean()), float(col.std())
        if sd <= DEGENERATE_SPREAD * (1.0 + abs(mu)):
            continue
        z = (col - mu) / sd
        usable = min(degree, np.unique(col).size - 1)
        for p in range(1, usable + 1):
            columns.append(z ** p)
    return np.column_stack(columns)


def regress(target: np.ndarray, state: np.ndarray, degree: int,
            partition: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Esperança condicional por mínimos quadrados polinomiais.

    Suporte degenerado (estado constante) reduz a regressão à média. Com
    `partition`, cada célula é regredida separadamente.

    Raises:
        SingularRegression: matriz de desenho sem posto completo
    """
    out = np.empty_like(target, dtype=float)
    labels = np.zeros(len(state), dtype=int) if partition is None else np.asarray(partition)
    for label in np.unique(labels):
        idx = labels == label
        A = _design_matrix(state[idx], degree)
        if A.shape[1] == 1:
            out[idx] = target[idx].mean(axis=0)
            continue
        if A.shape[0] < A.shape[1]:
            raise SingularRegression(
                f"{A.shape[0]} caminhos para {A.shape[1]} funções de base")
        coef, _, rank, _ = np.linalg.lstsq(A, target[idx], rcond=None)
        if rank < A.shape[1]:
            raise SingularRegression(f"Posto {rank} < {A.shape[1]} na regressão")
        out[idx] = A @ coef
    return out


def solve_rbsde_mc(spec: ProblemSpec, bundle: PathBundle,
                   control_path: Optional[np.ndarray] = None,
                   terminal_values: Optional[np.ndarray] = None,
                   obstacle: Optional[Obstacle] = None,
                   basis_degree: int = DEFAULT_BASIS_DEGREE,
                   partition: Optional[np.ndarray] = None) -> RBSDESolution:
    """
    BSDE refletido por Monte Carlo de mínimos quadrados.

    Em cada passo regride o fluxo de caixa V_{i+1} no estado para obter
    C_i ≈ E[V_{i+1} | X_i]; Y_i = max(C_i + gΔt, h). V_i = h onde a
    parada é ótima, senão V_{i+1} + gΔt.

    Args:
        spec: Problema
        bundle: Caminhos do simulador
        control_path: Controles (M, N, k); padrão: os usados na simulação
        terminal_values: ξ por caminho (padrão: Φ(X_T))
        obstacle: Função (t, x) → h (padrão: h do problema)
        basis_degree: Grau do polinômio (≥ 1)
        partition: Rótulos por caminho; regressões separadas por célula

    Raises:
        TerminalObstacleConflict, SingularRegression, NonFiniteDriver
    """
    if basis_degree < 1:
        raise InvalidParams(f"basis_degree deve ser ≥ 1, recebido {basis_degree}")
    obstacle = spec.obstacle if obstacle is None else obstacle
    M, N, d = bundle.n_paths, bundle.n_steps, spec.brownian_dim
    X = bundle.states
    dt = bundle.dt
    controls = bundle.controls_used if control_path is None else np.broadcast_to(
        np.asarray(control_path, dtype=float), bundle.controls_used.shape)
    if partition is not None and np.shape(partition) != (M,):
        raise ShapeMismatch(f"Partição com forma {np.shape(partition)}, esperado ({M},)")

    V = (np.asarray(spec.terminal(X[:, N]), dtype=float) if terminal_values is None
         else np.asarray(terminal_values, dtype=float))
    V = np.broadcast_to(V, (M,)).copy()

    Y = np.empty((M, N + 1))
    Z = np.zeros((M, N + 1, d))
    dK = np.zeros((M, N + 1))
    S = np.empty((M, N + 1))
    S[:, N] = np.broadcast_to(obstacle(bundle.t1, X[:, N]), (M,))
    if np.any(V < S[:, N] - TERMINAL_TOLERANCE):
        raise TerminalObstacleConflict("Valores terminais abaixo do obstáculo")
    Y[:, N] = V

    for i in range(N - 1, -1, -1):
        t = float(bundle.times[i])
        state = X[:, i]
        C = regress(V, state, basis_degree, partition)
        Z[:, i] = regress(V[:, None] * bundle.brownian_increments[:, i] / dt,
                          state, basis_degree, partition)
        g = np.broadcast_to(np.asarray(spec.driver(t, state, C, Z[:, i], controls[:, i]),
                                       dtype=float), (M,))
        if not np.all(np.isfinite(g)):
            raise NonFiniteDriver(f"Driver não finito no passo {i} ({spec.name})")
        continuation = C + g * dt
        S[:, i] = np.broadcast_to(obstacle(t, state), (M,))
        Y[:, i], dK[:, i] = reflect(continuation, S[:, i])
        V = np.where(continuation < S[:, i], S[:, i], V + g * dt)

    logger.debug("✅ BSDE refletido MC (%s): M=%d, N=%d, Y0=%.6g",
                 spec.name, M, N, float(Y[:, 0].mean()))
    return RBSDESolution(Y=Y, Z=Z, dK=dK, obstacle_S=S, times=bundle.times, mode='mc')


# ========== VERIFICAÇÕES ==========

def _same_grid(a: RBSDESolution, b: RBSDESolution):
    if a.Y.shape != b.Y.shape or a.mode != b.mode:
        raise ShapeMismatch(f"Soluções em grades diferentes: {a.Y.shape} e {b.Y.shape}")


def comparison_check(sol_low: RBSDESolution, sol_high: RBSDESolution) -> float:
    """max (Y_low - Y_high)⁺ sobre toda a grade."""
    _same_grid(sol_low, sol_high)
    return float(np.max(np.maximum(sol_low.Y - sol_high.Y, 0.0)))


def sup_gap(sol_a: RBSDESolution, sol_b: RBSDESolution) -> float:
    """sup |Y_a - Y_b| sobre toda a grade."""
    _same_grid(sol_a, sol_b)
    return float(np.max(np.abs(sol_a.Y - sol_b.Y)))


def skorokhod_residual(sol: RBSDESolution) -> Tuple[float, float]:
    """
    (Σ (Y - S)·ΔK, min ΔK): a condição de reflexão mínima exige ambos nulos
    ou o segundo não negativo.
    """
    return float(np.sum((sol.Y - sol.obstacle_S) * sol.dK)), float(np.min(sol.dK))


def perturbed_problem(spec: ProblemSpec, component: str, epsilon: float) -> ProblemSpec:
    """
    Problema com um componente dos dados deslocado por ε.

    terminal: Φ + ε; driver: g + ε; obstacle: h - ε (mantém Φ ≥ h).
    """
    if component not in PERTURBATIONS:
        raise InvalidParams(f"Perturbação desconhecida: {component!r} ({PERTURBATIONS})")
    if component == 'terminal':
        changes = {'terminal': lambda x: spec.terminal(x) + epsilon}
    elif component == 'driver':
        changes = {'driver': lambda t, x, y, z, v: spec.driver(t, x, y, z, v) + epsilon}
    else:
        changes = {'obstacle': lambda t, x: spec.obstacle(t, x) - epsilon}
    return dataclasses.replace(spec, name=f"{spec.name}+{component}", **changes)


def ordered_problems(spec: ProblemSpec,
                     rng: np.random.Generator) -> Tuple[ProblemSpec, ProblemSpec]:
    """
    Par sorteado de dados ordenados (ξ ≤ ξ', g ≤ g', S ≤ S') a partir de `spec`.

    g = g_spec + α·min(y - κ, 0) e g' = g + β·(1 + |y - κ|), ambos
    Lipschitz por partes; ξ' = ξ + c e S' = S + s com 0 ≤ s ≤ c.
    """
    alpha, beta = rng.uniform(0.0, 1.0, size=2)
    kappa = float(rng.normal())
    c = float(rng.uniform(0.0, 1.0))
    s = float(rng.uniform(0.0, c))

    def low_driver(t, x, y, z, v):
        return spec.driver(t, x, y, z, v) + alpha * np.minimum(y - kappa, 0.0)

    def high_driver(t, x, y, z, v):
        return low_driver(t, x, y, z, v) + beta * (1.0 + np.abs(y - kappa))

    low = dataclasses.replace(spec, name=f"{spec.name}-low", driver=low_driver)
    high = dataclasses.replace(
        spec, name=f"{spec.name}-high", driver=high_driver,
        terminal=lambda x: spec.terminal(x) + c,
        obstacle=lambda t, x: spec.obstacle(t, x) + s,
    )
    return low, high


def scaled_problem(spec: ProblemSpec, lam: float) -> ProblemSpec:
    """Dados (λΦ, λg(·, y/λ, z/λ), λh): a solução escala para (λY, λZ, λK)."""
    if lam <= 0:
        raise InvalidParams(f"λ deve ser positivo, recebido {lam}")
    return dataclasses.replace(
        spec, name=f"{spec.name}×{lam:g}",
        terminal=lambda x: lam * spec.terminal(x),
        driver=lambda t, x, y, z, v: lam * spec.driver(t, x, y / lam, z / lam, v),
        obstacle=lambda t, x: lam * spec.obstacle(t, x),
    )


def _start_node(sol: RBSDESolution, j0: Optional[int]) -> int:
    return len(sol.x_grid) // 2 if j0 is None else int(j0)


def _require_lattice(sol: RBSDESolution):
    if sol.mode != 'lattice':
        raise InvalidParams("Estimativas calculadas apenas para soluções em lattice")


def apriori_sides(sol: RBSDESolution, spec: ProblemSpec, lattice: Lattice,
                  t_index: int = 0, j0: Optional[int] = None,
                  paths: int = DEFAULT_SAMPLE_PATHS, seed: int = 0) -> Tuple[float, float]:
    """
    Lados da estimativa a priori ao longo de caminhos da cadeia que partem
    de (t_index, j0):

        lhs = E[sup Y² + Σ|Z|²Δt + (K_T - K_t)²]
        rhs = E[ξ² + (Σ|g(s, 0, 0)|Δt)² + sup S²]
    """
    _require_lattice(sol)
    j0 = _start_node(sol, j0)
    N, J, d = sol.n_steps, len(sol.x_grid), sol.Z.shape[-1]
    dt = sol.dt
    zeros_z = np.zeros((J, d))

    sup_y2 = sum_z2 = k_inc = g0_sum = sup_s2 = 0.0
    for i, nodes in iterate_chain(lattice, sol.control, j0, paths, seed, t_index):
        sup_y2 = np.maximum(sup_y2, sol.Y[i, nodes] ** 2)
        sup_s2 = np.maximum(sup_s2, sol.obstacle_S[i, nodes] ** 2)
        if i < N:
            sum_z2 = sum_z2 + np.sum(sol.Z[i, nodes] ** 2, axis=-1) * dt
            k_inc = k_inc + sol.dK[i, nodes]
            v = lattice.control_grid[control_at(sol.control, i)]
            g0 = spec.driver_1d(float(sol.times[i]), sol.x_grid, np.zeros(J), zeros_z, v)
            g0_sum = g0_sum + np.abs(g0[nodes]) * dt
        else:
            xi2 = sol.Y[N, nodes] ** 2

    lhs = float(np.mean(sup_y2 + sum_z2 + k_inc ** 2))
    rhs = float(np.mean(xi2 + g0_sum ** 2 + sup_s2))
    return lhs, rhs


def stability_sides(sol: RBSDESolution, sol_pert: RBSDESolution, spec: ProblemSpec,
                    lattice: Lattice, perturbation: str, epsilon: float, C: float = 1.0,
                    t_index: int = 0, j0: Optional[int] = None,
                    paths: int = DEFAULT_SAMPLE_PATHS, seed: int = 0) -> Tuple[float, float]:
    """
    Lados da estimativa de estabilidade entre (ξ, g, S) e os dados
    perturbados por `perturbed_problem(spec, perturbation, epsilon)`:

        lhs = E[sup|ΔY|² + Σ|ΔZ|²Δt + |ΔK_T - ΔK_t|²]
        rhs = C·E[|Δξ|² + (Σ|Δg(s, Y, Z)|Δt)²] + C·(E[sup|ΔS|²])^½·Ψ^½

    com Ψ = E[ξ² + (Σ|g(s,0,0)|Δt)² + sup S² + (os mesmos termos dos dados
    perturbados)].
    """
    _require_lattice(sol)
    _same_grid(sol, sol_pert)
    spec_pert = perturbed_problem(spec, perturbation, epsilon)
    j0 = _start_node(sol, j0)
    N, J, d = sol.n_steps, len(sol.x_grid), sol.Z.shape[-1]
    dt = sol.dt
    x = sol.x_grid
    zeros_z = np.zeros((J, d))

    sup_dy2 = sum_dz2 = dk = dg_sum = sup_ds2 = 0.0
    g0_sum = g0p_sum = sup_s2 = sup_sp2 = 0.0
    for i, nodes in iterate_chain(lattice, sol.control, j0, paths, seed, t_index):
        sup_dy2 = np.maximum(sup_dy2, (sol.Y[i, nodes] - sol_pert.Y[i, nodes]) ** 2)
        sup_ds2 = np.maximum(sup_ds2, (sol.obstacle_S[i, nodes]
                                       - sol_pert.obstacle_S[i, nodes]) ** 2)
        sup_s2 = np.maximum(sup_s2, sol.obstacle_S[i, nodes] ** 2)
        sup_sp2 = np.maximum(sup_sp2, sol_pert.obstacle_S[i, nodes] ** 2)
        if i < N:
            t = float(sol.times[i])
            v = lattice.control_grid[control_at(sol.control, i)]
            sum_dz2 = sum_dz2 + np.sum((sol.Z[i, nodes] - sol_pert.Z[i, nodes]) ** 2,
                                       axis=-1) * dt
            dk = dk + sol.dK[i, nodes] - sol_pert.dK[i, nodes]
            dg = (spec.driver_1d(t, x, sol.Y[i], sol.Z[i], v)
                  - spec_pert.driver_1d(t, x, sol.Y[i], sol.Z[i], v))
            dg_sum = dg_sum + np.abs(dg[nodes]) * dt
            g0 = spec.driver_1d(t, x, np.zeros(J), zeros_z, v)
            g0p = spec_pert.driver_1d(t, x, np.zeros(J), zeros_z, v)
            g0_sum = g0_sum + np.abs(g0[nodes]) * dt
            g0p_sum = g0p_sum + np.abs(g0p[nodes]) * dt
        else:
            xi = sol.Y[N, nodes]
            xi_p = sol_pert.Y[N, nodes]

    lhs = float(np.mean(sup_dy2 + sum_dz2 + dk ** 2))
    psi = float(np.mean(xi ** 2 + g0_sum ** 2 + sup_s2 + xi_p ** 2 + g0p_sum ** 2 + sup_sp2))
    rhs = (C * float(np.mean((xi - xi_p) ** 2 + dg_sum ** 2))
           + C * float(np.sqrt(np.mean(sup_ds2))) * np.sqrt(psi))
    return lhs, float(rhs)


def joint_stability_sides(spec: ProblemSpec, x0, x0_prime, control, control_prime,
                          Nt: int = 50, paths: int = DEFAULT_SAMPLE_PATHS, seed: int = 0,
                          basis_degree: int = DEFAULT_BASIS_DEGREE,
                          C: float = 1.0) -> Tuple[float, float]:
    """
    Lados da estabilidade conjunta no ponto inicial e no controle, com os
    dois sistemas simulados pelas mesmas sementes e resolvidos por Monte Carlo:

        lhs = E[sup|ΔY|² + Σ|ΔZ|²Δt + |ΔK_T|²]
        rhs = C·ρ² + C·(1 + |ζ| + |ζ'|)·ρ,   ρ² = |ζ - ζ'|² + E[Σ|v - v'|²Δt]
    """
    a = simulate(spec, control, 0.0, x0, Nt, paths, seed)
    b = simulate(spec, control_prime, 0.0, x0_prime, Nt, paths, seed)
    sol_a = solve_rbsde_mc(spec, a, basis_degree=basis_degree)
    sol_b = solve_rbsde_mc(spec, b, basis_degree=basis_degree)

    dY = sol_a.Y - sol_b.Y
    dZ = (sol_a.Z - sol_b.Z)[:, :Nt]
    dK = sol_a.dK.sum(axis=1) - sol_b.dK.sum(axis=1)
    lhs = float(np.mean(np.max(dY ** 2, axis=1) + np.sum(dZ ** 2, axis=(1, 2)) * a.dt
                        + dK ** 2))

    zeta, zeta_p = a.initial_state, b.initial_state
    dv = a.controls_used - b.controls_used
    rho2 = (float(np.sum((zeta - zeta_p) ** 2))
            + float(np.mean(np.sum(dv ** 2, axis=(1, 2)))) * a.dt)
    growth = 1.0 + float(np.linalg.norm(zeta)) + float(np.linalg.norm(zeta_p))
    rhs = C * rho2 + C * growth * float(np.sqrt(rho2))
    logger.debug("🔬 Estabilidade conjunta (%s): lhs=%.3g rhs=%.3g", spec.name, lhs, rhs)
    return lhs, rhs


def fitted_constant(lhs: float, rhs: float) -> float:
    """Constante C = lhs/rhs de uma instância de referência."""
    if rhs <= 0:
        raise InvalidParams(f"Lado direito deve ser positivo para ajustar C, recebido {rhs}")
    return lhs / rhs


# ========== EXPORTAÇÃO ==========

def dump_solution_csv(sol: RBSDESolution, file_path: str) -> bool:
    """Exporta (t, x, Y, Z_0…, K) nos instantes de relatório (modo lattice)."""
    _require_lattice(sol)
    d = sol.Z.shape[-1]
    header = ('t', 'x', 'Y', *[f'Z_{c}' for c in range(d)], 'K')
    return write_csv(file_path, header, sol.rows())
