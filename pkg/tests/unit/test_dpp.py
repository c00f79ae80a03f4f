# -*- coding: utf-8 -*-
"""
Testes unitários para o semigrupo, a programação dinâmica e a enumeração exaustiva

Execute com: pytest tests/unit/test_dpp.py
"""

import dataclasses

import numpy as np
import pytest

from src.models.report import SemigroupQuery
from src.processing.dpp import (
    dpp_check, dump_dpp_csv, mixed_bruteforce, partition_concat_check, regularity_check,
    semigroup_eval, tabulated_tree,
)
from src.processing.hjb import value_field_from_lattice
from src.processing.persistence import read_csv
from src.processing.problems import builtin_problem
from src.processing.rbsde import perturbed_problem, solve_optimal_lattice
from src.utils.exceptions import ExplosionGuard, InvalidParams, MisalignedWindow, WindowMismatch
from tests.fixtures.builders import small_field, small_lattice

# ================== FIXTURES ==================

@pytest.fixture(scope="module")
def drift_field():
    """(problema, campo do lattice ótimo) para o drift controlado"""
    spec, lattice = small_lattice('controlled_drift')
    sol = solve_optimal_lattice(lattice, spec)
    return spec, value_field_from_lattice(sol, lattice)

# ================== TESTES DO SEMIGRUPO ==================

def test_semigroup_linear_terminal():
    """Teste de G[η](x) = x para η linear sem drift"""
    spec, lattice = small_lattice('inactive_obstacle')
    query = SemigroupQuery(t=0.0, x=1.0, delta=1.0, terminal_field=lattice.x_grid.copy())

    assert semigroup_eval(query, spec, lattice) == pytest.approx(1.0, abs=1e-6)

def test_semigroup_optimized_window():
    """Teste de G com re-otimização por nó na janela"""
    spec, lattice = small_lattice('controlled_drift')
    query = SemigroupQuery(t=0.0, x=0.0, delta=1.0, terminal_field=lattice.x_grid.copy(),
                           control=None)

    assert semigroup_eval(query, spec, lattice) == pytest.approx(1.0, abs=1e-6)

def test_semigroup_window_mismatch():
    """Teste de lattice que não cobre [t, t+δ]"""
    spec, lattice = small_lattice('inactive_obstacle')
    query = SemigroupQuery(t=0.0, x=0.0, delta=0.5, terminal_field=lattice.x_grid.copy())
    with pytest.raises(WindowMismatch):
        semigroup_eval(query, spec, lattice)

def test_semigroup_monotone_in_obstacle():
    """Teste de G crescente no obstáculo: h - 5 ≤ h → G_baixo ≤ G_alto"""
    spec, lattice = small_lattice('american_put', Nx=56)
    low = perturbed_problem(spec, 'obstacle', 5.0)
    terminal = spec.terminal_1d(lattice.x_grid)
    for x in (60.0, 100.0, 140.0):
        query = SemigroupQuery(t=0.0, x=x, delta=spec.horizon, terminal_field=terminal)
        assert semigroup_eval(query, low, lattice) <= semigroup_eval(query, spec, lattice) + 1e-12

    query = SemigroupQuery(t=0.0, x=60.0, delta=spec.horizon, terminal_field=terminal)
    assert semigroup_eval(query, spec, lattice) == pytest.approx(40.0, abs=1e-9)
    assert semigroup_eval(query, low, lattice) < 40.0 - 1.0

# ================== TESTES DE PROGRAMAÇÃO DINÂMICA ==================

def test_dpp_lattice_route_exact(drift_field):
    """Teste de u(t, x) = G[u(t+δ, ·)](x) com o mesmo lattice"""
    spec, field = drift_field
    report = dpp_check(spec, field, 0.2, [(0.0, 0.0), (0.4, 1.2), (0.4, -0.6)])

    assert report.max_abs_gap <= 1e-12
    assert report.max_abs_gap_frozen <= 1e-6
    assert report.grid_params['Nt_window'] == 2
    assert report.grid_params['substeps'] == field.substeps

def test_dpp_misaligned_delta(drift_field):
    """Teste de δ que não é múltiplo do passo de relatório"""
    spec, field = drift_field
    with pytest.raises(MisalignedWindow):
        dpp_check(spec, field, 0.15, [(0.0, 0.0)])

def test_dpp_misaligned_sample_time(drift_field):
    """Teste de instante de amostra fora da grade"""
    spec, field = drift_field
    with pytest.raises(MisalignedWindow):
        dpp_check(spec, field, 0.2, [(0.05, 0.0)])

def test_dpp_window_beyond_horizon(drift_field):
    """Teste de t + δ além do horizonte"""
    spec, field = drift_field
    with pytest.raises(MisalignedWindow):
        dpp_check(spec, field, 0.2, [(0.9, 0.0)])

def test_dump_dpp_csv(drift_field, tmp_path):
    """Teste da exportação da tabela de gaps"""
    spec, field = drift_field
    report = dpp_check(spec, field, 0.2, [(0.0, 0.0)])
    path = tmp_path / "dpp.csv"

    assert dump_dpp_csv(report, str(path))
    rows = read_csv(str(path))
    assert len(rows) == 1
    assert float(rows[0]['delta']) == pytest.approx(0.2)

# ================== TESTES DE ENUMERAÇÃO EXAUSTIVA ==================

@pytest.mark.parametrize("seed", range(5))
def test_bruteforce_matches_lattice(seed):
    """Teste da enumeração exaustiva contra o lattice ótimo"""
    spec, lattice, j0 = tabulated_tree(seed=seed)
    brute = mixed_bruteforce(lattice, spec, j0)
    optimal = solve_optimal_lattice(lattice, spec)

    assert brute == pytest.approx(float(optimal.Y[0, j0]), abs=1e-12)

def test_tabulated_tree_terminal_above_obstacle():
    """Teste de Φ ≥ h(T) na árvore sorteada"""
    spec, lattice, _ = tabulated_tree(seed=3)
    x = lattice.x_grid

    assert np.all(spec.terminal_1d(x) >= spec.obstacle_1d(spec.horizon, x))
    assert lattice.n_steps == 3
    assert lattice.n_controls == 2

def test_bruteforce_explosion_guard():
    """Teste de árvore grande demais"""
    spec, lattice = small_lattice('controlled_drift')
    with pytest.raises(ExplosionGuard):
        mixed_bruteforce(lattice, spec, lattice.n_nodes // 2)

def test_bruteforce_rejects_state_dependent_driver():
    """Teste de driver dependente de y"""
    spec, lattice, j0 = tabulated_tree(seed=0)
    coupled = dataclasses.replace(spec, driver=lambda t, x, y, z, v: y)
    with pytest.raises(InvalidParams):
        mixed_bruteforce(lattice, coupled, j0)

# ================== TESTES DE CONCATENAÇÃO ==================

def test_partition_degenerate_event():
    """Teste de concatenação com A = Ω"""
    spec = builtin_problem('controlled_drift')
    gap = partition_concat_check(spec, 0.5, 0.0, 1.0, -1.0, M=2000, degenerate=True)

    assert gap == 0.0

def test_partition_distinct_controls():
    """Teste de concatenação com A = {W_{t/2} ≥ 0}"""
    spec = builtin_problem('controlled_drift')
    gap = partition_concat_check(spec, 0.5, 0.0, 1.0, -1.0, M=2000)

    assert gap <= 5e-2

def test_partition_time_not_interior():
    """Teste de instante de concatenação no extremo"""
    spec = builtin_problem('controlled_drift')
    with pytest.raises(MisalignedWindow):
        partition_concat_check(spec, 0.0, 0.0, 1.0, -1.0, M=10)

def test_partition_time_needs_two_steps():
    """Teste de concatenação no primeiro passo: evento W_{t/2} trivial"""
    spec = builtin_problem('controlled_drift')
    with pytest.raises(InvalidParams):
        partition_concat_check(spec, 0.02, 0.0, 1.0, -1.0, M=10, Nt=50)

# ================== TESTES DE REGULARIDADE ==================

def test_regularity_controlled_drift():
    """Teste das razões para u = x + T - t"""
    spec, field = small_field('controlled_drift')
    report = regularity_check(field)

    assert report.growth_ratio <= 1.0 + 1e-9
    assert report.lip_x_ratio == pytest.approx(1.0, abs=1e-9)
    assert report.holder_t_ratio == pytest.approx(0.1 / np.sqrt(0.1), rel=1e-6)

def test_regularity_put_linear_growth():
    """Teste de |u|/(1 + |x|) ≤ K para o put em vários pontos iniciais"""
    spec, field = small_field('american_put', Nx=56)
    report = regularity_check(field)
    sweep = [field.value_at(0.0, x) / (1.0 + x) for x in (40.0, 100.0, 200.0, 290.0)]

    assert report.growth_ratio <= spec.params['K']
    assert max(sweep) <= report.growth_ratio + 1e-12
