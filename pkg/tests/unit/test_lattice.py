# -*- coding: utf-8 -*-
"""
Testes unitários para o lattice trinomial

Execute com: pytest tests/unit/test_lattice.py
"""

import numpy as np
import pytest

from src.processing.lattice import (
    build_lattice, conditional_expectation, dump_lattice_csv, expectation,
    increment_regression, sample_chain,
)
from src.processing.persistence import read_csv
from src.processing.problems import builtin_problem
from src.utils.exceptions import (
    CFLViolation, DegenerateDomain, IndexOutOfRange, InvalidParams, ShapeMismatch,
)
from tests.fixtures.builders import small_lattice

# ================== FIXTURES ==================

@pytest.fixture
def put_lattice():
    """(problema, lattice) do put americano em grade pequena"""
    return small_lattice('american_put', Nt=10, Nx=40)

@pytest.fixture
def drift_lattice():
    """Lattice com b = 0.5 e σ = 1 constantes"""
    spec = builtin_problem('inactive_obstacle', {'drift': 0.5, 'vol': 1.0})
    return spec, build_lattice(spec, 0.0, 1.0, 10, -6.0, 6.0, 40)

# ================== TESTES DE CONSTRUÇÃO ==================

def test_lattice_dimensions(put_lattice):
    """Teste de passos finos, nós e instantes de relatório"""
    _, lattice = put_lattice

    assert lattice.n_nodes == 41
    assert lattice.n_controls == 1
    assert lattice.n_steps == 10 * lattice.substeps
    assert len(lattice.report_indices) == 11
    assert lattice.report_times[-1] == pytest.approx(1.0)
    assert lattice.dt == pytest.approx(0.1 / lattice.substeps)

def test_probabilities_valid(put_lattice):
    """Teste de probabilidades não negativas somando 1"""
    _, lattice = put_lattice
    for i in (0, lattice.n_steps // 2, lattice.n_steps - 1):
        s = lattice.step(i)
        assert np.all(s.p_down >= 0.0)
        assert np.all(s.p_mid >= 0.0)
        assert np.all(s.p_up >= 0.0)
        assert np.allclose(s.p_down + s.p_mid + s.p_up, 1.0, atol=1e-14)

def test_reflecting_boundary(put_lattice):
    """Teste da fronteira refletora"""
    _, lattice = put_lattice
    s = lattice.step(0)

    assert np.all(s.p_down[:, 0] == 0.0)
    assert np.all(s.p_up[:, -1] == 0.0)

def test_local_consistency(drift_lattice):
    """Teste de média bΔt e segundo momento σ²Δt + b²Δt² nos nós interiores"""
    _, lattice = drift_lattice
    s = lattice.step(0)
    x = lattice.x_grid
    dt = lattice.dt
    inner = slice(1, -1)
    mean = (s.p_up[0] - s.p_down[0]) * lattice.dx
    second = (s.p_up[0] + s.p_down[0]) * lattice.dx ** 2

    assert np.allclose(mean[inner], 0.5 * dt, atol=1e-14)
    assert np.allclose(second[inner], dt + (0.5 * dt) ** 2, atol=1e-14)
    assert x[0] == -6.0

def _square_defect(Nt: int) -> tuple:
    """(Δt, max |E[X²_{i+1} | x] - x² - (2xb + σ²)Δt| / Δt) nos nós interiores"""
    spec, lattice = small_lattice('inactive_obstacle', Nt=Nt, params={'drift': 0.5})
    x = lattice.x_grid
    dt = lattice.dt
    second = conditional_expectation(lattice, 0, 0, x ** 2)
    defect = np.abs(second - x ** 2 - (2.0 * 0.5 * x + 1.0) * dt)[1:-1] / dt
    return dt, float(defect.max())

def test_square_martingale_defect_shrinks_with_dt():
    """Teste do defeito de consistência de x² decaindo pelo menos linearmente em Δt"""
    dt_coarse, coarse = _square_defect(20)
    dt_fine, fine = _square_defect(40)

    assert dt_fine < dt_coarse
    assert coarse > 0.0
    assert fine <= coarse * (dt_fine / dt_coarse) * (1.0 + 1e-6)

def test_cfl_violation_when_substeps_too_small():
    """Teste de CFL violada com subpassos insuficientes"""
    spec = builtin_problem('american_put')
    with pytest.raises(CFLViolation):
        build_lattice(spec, 0.0, 1.0, 200, 20.0, 300.0, 400, substeps=1)

def test_automatic_substeps():
    """Teste da escolha automática de subpassos"""
    spec = builtin_problem('american_put')
    lattice = build_lattice(spec, 0.0, 1.0, 20, 20.0, 300.0, 40)

    assert lattice.substeps >= 1
    assert lattice.n_steps == 20 * lattice.substeps

def test_degenerate_domain():
    """Teste de domínio invertido e grade pequena demais"""
    spec = builtin_problem('constant_obstacle')
    with pytest.raises(DegenerateDomain):
        build_lattice(spec, 0.0, 1.0, 10, 1.0, -1.0, 20)
    with pytest.raises(DegenerateDomain):
        build_lattice(spec, 0.0, 1.0, 10, -1.0, 1.0, 3)

def test_window_outside_horizon():
    """Teste de janela além do horizonte"""
    spec = builtin_problem('constant_obstacle')
    with pytest.raises(InvalidParams):
        build_lattice(spec, 0.0, 2.0, 10, -6.0, 6.0, 20)

def test_kernel_out_of_range(put_lattice):
    """Teste de índices fora da grade"""
    _, lattice = put_lattice
    with pytest.raises(IndexOutOfRange):
        lattice.kernel(0, lattice.n_nodes, 0)
    with pytest.raises(IndexOutOfRange):
        lattice.kernel(lattice.n_steps, 0, 0)
    with pytest.raises(IndexOutOfRange):
        lattice.kernel(0, 0, 1)

def test_kernel_destinations(put_lattice):
    """Teste dos destinos (j-1, j, j+1) e das bordas"""
    _, lattice = put_lattice
    _, dests = lattice.kernel(0, 5, 0)
    _, edge = lattice.kernel(0, 0, 0)

    assert dests == (4, 5, 6)
    assert edge == (0, 0, 1)

def test_lattice_to_dict(put_lattice):
    """Teste da descrição serializável"""
    _, lattice = put_lattice
    d = lattice.to_dict()

    assert d['problem'] == 'american_put'
    assert d['n_nodes'] == 41
    assert 'american_put' in repr(lattice)

# ================== TESTES DE ESPERANÇA ==================

def test_expectation_of_constant(put_lattice):
    """Teste da esperança de um campo constante"""
    _, lattice = put_lattice
    field = np.full(lattice.n_nodes, 3.0)

    assert expectation(lattice, 0, 10, 0, field) == pytest.approx(3.0, abs=1e-14)
    assert np.allclose(conditional_expectation(lattice, 0, 0, field), 3.0, atol=1e-14)

def test_expectation_matches_vectorized(put_lattice):
    """Teste de consistência entre as formas escalar e vetorizada"""
    _, lattice = put_lattice
    field = lattice.x_grid ** 2
    vector = conditional_expectation(lattice, 3, 0, field)
    for j in (0, 7, 20, lattice.n_nodes - 1):
        assert expectation(lattice, 3, j, 0, field) == pytest.approx(vector[j], rel=1e-14)

def test_expectation_shape_mismatch(put_lattice):
    """Teste de campo com tamanho errado"""
    _, lattice = put_lattice
    with pytest.raises(ShapeMismatch):
        expectation(lattice, 0, 0, 0, np.zeros(3))

def test_increment_regression_linear_field(drift_lattice):
    """Teste de Z = σ para o campo linear Y = x"""
    _, lattice = drift_lattice
    Z = increment_regression(lattice, 0, 0, lattice.x_grid.copy())

    assert Z.shape == (lattice.n_nodes, 1)
    assert np.allclose(Z[1:-1, 0], 1.0, atol=1e-9)

def test_policy_selection(put_lattice):
    """Teste de seleção por política de nós"""
    _, lattice = put_lattice
    policy = np.zeros(lattice.n_nodes, dtype=int)
    p_down, _, _, _, _ = lattice.select(0, policy)

    assert np.array_equal(p_down, lattice.step(0).p_down[0])
    with pytest.raises(IndexOutOfRange):
        lattice.select(0, np.ones(lattice.n_nodes, dtype=int))

# ================== TESTES DE AMOSTRAGEM ==================

def test_sample_chain_reproducible(put_lattice):
    """Teste de reprodutibilidade com a mesma semente"""
    _, lattice = put_lattice
    a = sample_chain(lattice, 0, 20, paths=100, seed=3)
    b = sample_chain(lattice, 0, 20, paths=100, seed=3)
    c = sample_chain(lattice, 0, 20, paths=100, seed=4)

    assert a.shape == (100, lattice.n_steps + 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(a[:, 0] == 20)

def test_sample_chain_mean(drift_lattice):
    """Teste da média empírica de X_T com drift 0.5"""
    _, lattice = drift_lattice
    j0 = lattice.n_nodes // 2
    nodes = sample_chain(lattice, 0, j0, paths=20000, seed=0)
    x_final = lattice.x_grid[nodes[:, -1]]

    assert np.mean(x_final) == pytest.approx(0.5, abs=0.05)

def test_sample_chain_bad_start(put_lattice):
    """Teste de nó inicial inválido"""
    _, lattice = put_lattice
    with pytest.raises(IndexOutOfRange):
        sample_chain(lattice, 0, -1, paths=10)

def test_dump_lattice_csv(put_lattice, tmp_path):
    """Teste da exportação dos núcleos"""
    _, lattice = put_lattice
    path = tmp_path / "kernels.csv"

    assert dump_lattice_csv(lattice, str(path), step=0)
    rows = read_csv(str(path))
    assert len(rows) == lattice.n_nodes * lattice.n_controls
    assert set(rows[0]) == {'step', 't', 'node', 'x', 'control', 'p_down', 'p_mid', 'p_up'}
