# -*- coding: utf-8 -*-
"""
Semigrupo retroativo e verificações estruturais da função valor.

Funcionalidades:
- semigroup_eval: G_{t,t+δ}[η] pelo BSDE refletido no lattice da janela
- dpp_check: programação dinâmica com controle congelado e por nó
- partition_concat_check: concatenação de controles sobre uma partição
  F_t-mensurável (Monte Carlo)
- mixed_bruteforce: enumeração exaustiva de (controle, região de parada)
- regularity_check: razões de Lipschitz em x, Hölder em t e crescimento
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import itertools
import logging

import numpy as np

from src.models.lattice import Lattice
from src.models.problem import FiniteSet, ProblemSpec
from src.models.report import DPPReport, RegularityReport, SemigroupQuery
from src.models.solution import ValueField
from src.processing.forward_sim import simulate
from src.processing.lattice import build_lattice
from src.processing.persistence import write_csv
from src.processing.rbsde import (
    DEFAULT_BASIS_DEGREE, solve_optimal_lattice, solve_rbsde_mc, solve_reflected_lattice,
)
from src.utils.exceptions import (
    ExplosionGuard, InvalidParams, MisalignedWindow, WindowMismatch,
)

logger = logging.getLogger(__name__)

WINDOW_TOLERANCE = 1e-9
REACH_THRESHOLD = 1e-14

MAX_TREE_STEPS = 3
MAX_TREE_NODES = 7
MAX_TREE_CONTROLS = 3
MAX_DECISION_NODES = 6


# ========== SEMIGRUPO ==========

def semigroup_eval(query: SemigroupQuery, spec: ProblemSpec, lattice: Lattice) -> float:
    """
    G_{t,t+δ}[η](x): resolve o BSDE refletido em [t, t+δ] com terminal η e
    retorna Y em (t, x), interpolado linearmente em x.

    Raises:
        WindowMismatch: o lattice não cobre exatamente [t, t+δ]
        TerminalObstacleConflict: η abaixo de h(t+δ, ·)
    """
    if (abs(lattice.t0 - query.t) > WINDOW_TOLERANCE
            or abs(lattice.t1 - (query.t + query.delta)) > WINDOW_TOLERANCE):
        raise WindowMismatch(
            f"Lattice cobre [{lattice.t0:.6g}, {lattice.t1:.6g}], "
            f"pedido [{query.t:.6g}, {query.t + query.delta:.6g}]")
    if query.control is None:
        sol = solve_optimal_lattice(lattice, spec, terminal=query.terminal_field)
    else:
        sol = solve_reflected_lattice(lattice, spec, query.control, terminal=query.terminal_field)
    return float(np.interp(query.x, lattice.x_grid, sol.Y[0]))


def _window_values(spec: ProblemSpec, lattice: Lattice, terminal: np.ndarray,
                   xs: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Valores (por nó, congelado) em t para vários x de uma mesma janela."""
    optimal = solve_optimal_lattice(lattice, spec, terminal=terminal)
    adapted = np.interp(xs, lattice.x_grid, optimal.Y[0])
    frozen = np.full(len(xs), -np.inf)
    for m in range(lattice.n_controls):
        sol = solve_reflected_lattice(lattice, spec, m, terminal=terminal)
        frozen = np.maximum(frozen, np.interp(xs, lattice.x_grid, sol.Y[0]))
    return adapted, frozen


def dpp_check(spec: ProblemSpec, u_field: ValueField, delta: float,
              sample_points: Iterable[Tuple[float, float]],
              control_count: Optional[int] = None) -> DPPReport:
    """
    Compara u(t, x) com sup_v G_{t,t+δ}[u(t+δ, ·)](x).

    Duas variantes: controle constante na janela (máximo sobre a grade) e
    re-otimização por nó (política adaptada). O lattice de cada janela usa
    a mesma grade espacial e o mesmo número de subpassos do campo.

    Raises:
        MisalignedWindow: t ou t+δ fora da grade de tempo do campo
    """
    points = [(float(t), float(x)) for t, x in sample_points]
    steps = delta / u_field.dt
    n_window = int(round(steps))
    if n_window < 1 or abs(steps - n_window) > WINDOW_TOLERANCE * max(1.0, steps):
        raise MisalignedWindow(f"δ={delta} não é múltiplo de Δt={u_field.dt}")

    by_time: Dict[float, List[int]] = {}
    for k, (t, x) in enumerate(points):
        u_field.time_index(t)
        u_field.time_index(t + delta)
        by_time.setdefault(t, []).append(k)

    lhs = [u_field.value_at(t, x) for t, x in points]
    rhs = [0.0] * len(points)
    rhs_frozen = [0.0] * len(points)
    x_lo, x_hi = float(u_field.x_grid[0]), float(u_field.x_grid[-1])
    Nx = len(u_field.x_grid) - 1
    for t, members in by_time.items():
        i_next = u_field.time_index(t + delta)
        t0, t1 = float(u_field.t_grid[u_field.time_index(t)]), float(u_field.t_grid[i_next])
        lattice = build_lattice(spec, t0, t1, n_window, x_lo, x_hi, Nx,
                                substeps=u_field.substeps, control_count=control_count)
        xs = [points[k][1] for k in members]
        adapted, frozen = _window_values(spec, lattice, u_field.u[i_next], xs)
        for k, a, f in zip(members, adapted, frozen):
            rhs[k], rhs_frozen[k] = float(a), float(f)

    report = DPPReport(
        sample_points=points,
        lhs=lhs,
        rhs=rhs,
        rhs_frozen=rhs_frozen,
        delta=float(delta),
        grid_params={'Nt_window': n_window, 'Nx': Nx, 'x_lo': x_lo, 'x_hi': x_hi,
                     'substeps': u_field.substeps},
    )
    logger.info("🔬 DPP (%s, δ=%g): gap por nó %.3g, congelado %.3g",
                spec.name, delta, report.max_abs_gap, report.max_abs_gap_frozen)
    return report


def dump_dpp_csv(report: DPPReport, file_path: str) -> bool:
    """Exporta a tabela (t, x, δ, lhs, rhs, rhs_frozen)."""
    return write_csv(file_path, ('t', 'x', 'delta', 'lhs', 'rhs', 'rhs_frozen'), report.rows())


# ========== PARTIÇÃO ==========

def partition_concat_check(spec: ProblemSpec, t: float, x0, v1, v2, seed: int = 0,
                           M: int = 10000, Nt: int = 50,
                           basis_degree: int = DEFAULT_BASIS_DEGREE,
                           degenerate: bool = False) -> float:
    """
    Discrepância máxima entre Y_t do controle concatenado 1_A v1 + 1_{A^c} v2
    e 1_A Y_t^{v1} + 1_{A^c} Y_t^{v2}, com A = {W_{t/2} ≥ 0}.

    Os três caminhos compartilham incrementos brownianos e o controle v1
    antes de t; as regressões são feitas separadamente em A e A^c.

    Args:
        degenerate: usa A = Ω

    Raises:
        MisalignedWindow: t fora dos instantes interiores da grade
        InvalidParams: t no primeiro passo (W_{t/2} seria trivial)
    """
    dt = spec.horizon / Nt
    i_t = int(round(t / dt))
    if not 0 < i_t < Nt or abs(i_t * dt - t) > WINDOW_TOLERANCE:
        raise MisalignedWindow(f"t={t} deve ser um instante interior da grade (Δt={dt})")
    if i_t < 2:
        raise InvalidParams(f"t={t} precisa de pelo menos 2 passos antes (Δt={dt})")
    k = spec.control_dim
    before = np.broadcast_to(np.asarray(v1, dtype=float), (Nt, k))
    after_1 = before
    after_2 = np.broadcast_to(np.asarray(v2, dtype=float), (Nt, k))

    base = simulate(spec, before, 0.0, x0, Nt, M, seed)
    if degenerate:
        event = np.ones(M, dtype=bool)
    else:
        w_half = base.brownian_increments[:, :i_t // 2, 0].sum(axis=1)
        event = w_half >= 0.0

    path_2 = np.concatenate([before[:i_t], after_2[i_t:]])
    concat = np.broadcast_to(path_2, (M, Nt, k)).copy()
    concat[event, i_t:] = after_1[i_t:]

    labels = event.astype(int)
    values = []
    for controls in (after_1, path_2, concat):
        bundle = simulate(spec, controls, 0.0, x0, Nt, M, seed).window(i_t)
        sol = solve_rbsde_mc(spec, bundle, basis_degree=basis_degree, partition=labels)
        values.append(sol.Y[:, 0])
    y1, y2, y_concat = values
    discrepancy = float(np.max(np.abs(y_concat - np.where(event, y1, y2))))
    logger.info("🔬 Concatenação (%s): discrepância %.3g", spec.name, discrepancy)
    return discrepancy


# ========== PROBLEMA MISTO ==========

def _decision_nodes(lattice: Lattice, j0: int) -> List[Tuple[int, int]]:
    """Nós (i, j) com i < N alcançáveis a partir de (0, j0) sob algum controle."""
    reach = np.zeros(lattice.n_nodes, dtype=bool)
    reach[j0] = True
    nodes = []
    for i in range(lattice.n_steps):
        nodes.extend((i, int(j)) for j in np.flatnonzero(reach))
        s = lattice.step(i)
        nxt = np.zeros_like(reach)
        for m in range(lattice.n_controls):
            nxt[lattice.down_index[reach & (s.p_down[m] > REACH_THRESHOLD)]] = True
            nxt[reach & (s.p_mid[m] > REACH_THRESHOLD)] = True
            nxt[lattice.up_index[reach & (s.p_up[m] > REACH_THRESHOLD)]] = True
        reach = nxt
    return nodes


def _check_control_free_driver(spec: ProblemSpec, lattice: Lattice):
    rng = np.random.default_rng(0)
    J, d = lattice.n_nodes, spec.brownian_dim
    t = lattice.t0
    for v in lattice.control_grid:
        a = spec.driver_1d(t, lattice.x_grid, rng.normal(size=J), rng.normal(size=(J, d)), v)
        b = spec.driver_1d(t, lattice.x_grid, rng.normal(size=J), rng.normal(size=(J, d)), v)
        if not np.array_equal(a, b):
            raise InvalidParams("mixed_bruteforce requer g = g(t, x, v)")


def mixed_bruteforce(lattice: Lattice, spec: ProblemSpec, j0: int) -> float:
    """
    sup sobre atribuições de controle por nó e regiões de parada do ganho
    E[Σ_{i<τ} g(t_i, X_i, v)Δt + h(τ, X_τ)1_{τ<T} + Φ(X_T)1_{τ=T}], calculado
    exatamente sobre as probabilidades da árvore.

    Raises:
        ExplosionGuard: árvore, grade de controles ou nós de decisão grandes demais
    """
    if (lattice.n_steps > MAX_TREE_STEPS or lattice.n_nodes > MAX_TREE_NODES
            or lattice.n_controls > MAX_TREE_CONTROLS):
        raise ExplosionGuard(
            f"Árvore grande demais: {lattice.n_steps} passos, {lattice.n_nodes} nós, "
            f"{lattice.n_controls} controles")
    decisions = _decision_nodes(lattice, j0)
    D = len(decisions)
    if D > MAX_DECISION_NODES:
        raise ExplosionGuard(f"{D} nós de decisão > {MAX_DECISION_NODES}")
    _check_control_free_driver(spec, lattice)

    N, J = lattice.n_steps, lattice.n_nodes
    x, dt = lattice.x_grid, lattice.dt
    zeros_z = np.zeros((J, spec.brownian_dim))
    h = np.stack([spec.obstacle_1d(float(t), x) for t in lattice.t_grid])
    phi = spec.terminal_1d(x)
    g = np.stack([
        np.stack([spec.driver_1d(float(lattice.t_grid[i]), x, np.zeros(J), zeros_z, v)
                  for v in lattice.control_grid])
        for i in range(N)
    ])                                                  # (N, m, J)
    kernels = [lattice.step(i) for i in range(N)]

    # Máscaras de parada: linha s = subconjunto s dos nós de decisão.
    subsets = np.array(list(itertools.product((False, True), repeat=D)), dtype=bool)
    stop = np.zeros((len(subsets), N, J), dtype=bool)
    for k, (i, j) in enumerate(decisions):
        stop[:, i, j] = subsets[:, k]

    cols = np.arange(J)
    best = -np.inf
    for assignment in itertools.product(range(lattice.n_controls), repeat=D):
        policy = np.zeros((N, J), dtype=int)
        for (i, j), m in zip(decisions, assignment):
            policy[i, j] = m
        mass = np.zeros((len(subsets), J))
        mass[:, j0] = 1.0
        value = np.zeros(len(subsets))
        for i in range(N):
            value += np.sum(np.where(stop[:, i], mass * h[i], 0.0), axis=1)
            mass = np.where(stop[:, i], 0.0, mass)
            value += mass @ (g[i][policy[i], cols] * dt)
            s = kernels[i]
            p_down = s.p_down[policy[i], cols]
            p_mid = s.p_mid[policy[i], cols]
            p_up = s.p_up[policy[i], cols]
            nxt = mass * p_mid
            np.add.at(nxt, (slice(None), lattice.down_index), mass * p_down)
            np.add.at(nxt, (slice(None), lattice.up_index), mass * p_up)
            mass = nxt
        value += mass @ phi
        best = max(best, float(value.max()))

    logger.debug("✅ Enumeração exaustiva: %d nós de decisão, valor %.12g", D, best)
    return best


def tabulated_tree(seed: int = 0, steps: int = 3, controls: int = 2,
                   nodes: int = 7, horizon: float = 0.75) -> Tuple[ProblemSpec, Lattice, int]:
    """
    Árvore pequena com g(t, x, v), h(t, x) e Φ(x) sorteados por nó.

    b = 0, σ = 1 e Δt = Δx²: p_mid = 0, de modo que 3 passos a partir do
    centro têm 6 nós de decisão. Φ ≥ h(T) por construção.

    Returns:
        (problema, lattice, nó inicial)
    """
    rng = np.random.default_rng(seed)
    dt = horizon / steps
    dx = float(np.sqrt(dt))
    half = (nodes - 1) // 2
    x_lo = -half * dx
    g_table = rng.uniform(-1.0, 1.0, size=(steps + 1, nodes, controls))
    h_table = rng.uniform(-1.0, 1.0, size=(steps + 1, nodes))
    phi_table = h_table[steps] + rng.uniform(0.0, 1.0, size=nodes)

    def node_of(x):
        return np.clip(np.rint((x[..., 0] - x_lo) / dx).astype(int), 0, nodes - 1)

    def step_of(t):
        return int(np.clip(round(t / dt), 0, steps))

    spec = ProblemSpec(
        name='tabulated_tree',
        state_dim=1, brownian_dim=1, control_dim=1,
        drift=lambda t, x, v: np.zeros(x.shape),
        diffusion=lambda t, x, v: np.ones(x.shape + (1,)),
        driver=lambda t, x, y, z, v: g_table[step_of(t), node_of(x),
                                             np.rint(v[..., 0]).astype(int)],
        terminal=lambda x: phi_table[node_of(x)],
        obstacle=lambda t, x: h_table[step_of(t), node_of(x)],
        control_set=FiniteSet(points=tuple((float(m),) for m in range(controls))),
        horizon=horizon,
        lipschitz_L=1.0,
        params={'seed': seed, 'steps': steps, 'controls': controls, 'nodes': nodes},
    )
    lattice = build_lattice(spec, 0.0, horizon, steps, x_lo, -x_lo, nodes - 1, substeps=1)
    return spec, lattice, half


# ========== REGULARIDADE ==========

def regularity_check(u_field: ValueField) -> RegularityReport:
    """
    lip_x_ratio = max |u(t, x_{j+1}) - u(t, x_j)|/Δx
    holder_t_ratio = max (|u(t_{i+1}, x) - u(t_i, x)| - 3|h(t_i, x) - h(t_{i+1}, x)|)⁺/√Δt
    growth_ratio = max |u|/(1 + |x|)
    """
    u, h = u_field.u, u_field.h_field
    lip = float(np.max(np.abs(np.diff(u, axis=1)))) / u_field.dx
    dh = np.abs(np.diff(h, axis=0))
    holder = np.maximum(np.abs(np.diff(u, axis=0)) - 3.0 * dh, 0.0)
    holder_ratio = float(np.max(holder)) / np.sqrt(u_field.dt)
    growth = float(np.max(np.abs(u) / (1.0 + np.abs(u_field.x_grid))))
    return RegularityReport(lip_x_ratio=lip, holder_t_ratio=holder_ratio, growth_ratio=growth)
