# -*- coding: utf-8 -*-
"""
Testes unitários para o solver de diferenças finitas da HJB com obstáculo

Execute com: pytest tests/unit/test_hjb.py
"""

import dataclasses

import numpy as np
import pytest

from src.processing.calculations import crr_american_put
from src.processing.hjb import (
    TERMINAL_LAYER, dump_field_csv, hamiltonian, residual_check, solve_hjb_fd,
    solve_penalized_hjb, value_field_from_lattice,
)
from src.processing.persistence import read_csv
from src.processing.problems import builtin_problem
from src.processing.rbsde import (
    perturbed_problem, scaled_problem, solve_optimal_lattice, solve_reflected_lattice,
)
from src.utils.exceptions import CFLViolation, DegenerateDomain, InvalidParams, MisalignedWindow
from tests.fixtures.builders import small_field, small_lattice

# ================== FIXTURES ==================

@pytest.fixture(scope="module")
def put_field():
    """Put americano na grade 10 × 56 (Δx = 5)"""
    return small_field('american_put', Nx=56)

@pytest.fixture
def grids():
    """Grade padrão para b = 0, σ = 1"""
    return np.linspace(0.0, 1.0, 11), np.linspace(-6.0, 6.0, 41)

# ================== TESTES DE SOLUÇÕES EXATAS ==================

def test_constant_obstacle_field():
    """Teste de u ≡ c com obstáculo ativo em toda a grade"""
    spec, field = small_field('constant_obstacle', params={'c': 1.0})

    assert np.allclose(field.u, 1.0, atol=1e-12)
    assert field.active_set.all()

def test_inactive_obstacle_linear_exact():
    """Teste de u(t, x) = x + b(T - t) exato, inclusive nas bordas"""
    spec, field = small_field('inactive_obstacle', params={'drift': 0.5})

    assert np.allclose(field.u[0], field.x_grid + 0.5, atol=1e-9)
    assert not field.active_set.any()

def test_controlled_drift_value_and_argmax():
    """Teste de u(0, 0) = 1 com v = vmax maximizador"""
    spec, field = small_field('controlled_drift')
    last = len(field.control_grid) - 1

    assert field.value_at(0.0, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert np.all(field.argmax_control[0] == last)
    assert np.all(field.argmax_control[-1] == -1)

def test_put_close_to_binomial(put_field):
    """Teste do put por diferenças finitas contra a árvore CRR"""
    spec, field = put_field
    reference = crr_american_put(100.0, 100.0, 0.05, 0.2, 1.0, steps=2000)

    assert field.value_at(0.0, 100.0) == pytest.approx(reference, rel=0.03)
    assert np.all(field.u >= field.h_field - 1e-12)
    assert field.active_set[0, 0]

# ================== TESTES DE VALIDAÇÃO ==================

def test_cfl_violation_without_substeps():
    """Teste de CFL com um único subpasso"""
    spec = builtin_problem('american_put')
    with pytest.raises(CFLViolation):
        solve_hjb_fd(spec, np.linspace(0.0, 1.0, 11), np.linspace(20.0, 300.0, 41), substeps=1)

def test_non_uniform_grid(grids):
    """Teste de grade espacial não uniforme"""
    spec = builtin_problem('inactive_obstacle')
    t_grid, _ = grids
    with pytest.raises(InvalidParams):
        solve_hjb_fd(spec, t_grid, np.linspace(0.0, 1.0, 21) ** 2)

def test_degenerate_grid(grids):
    """Teste de grade espacial com dois nós"""
    spec = builtin_problem('inactive_obstacle')
    t_grid, _ = grids
    with pytest.raises(DegenerateDomain):
        solve_hjb_fd(spec, t_grid, np.array([0.0, 1.0]))

def test_value_at_misaligned_time():
    """Teste de instante fora da grade de relatório"""
    spec, field = small_field('inactive_obstacle')
    with pytest.raises(MisalignedWindow):
        field.value_at(0.05, 0.0)

# ================== TESTES DE PENALIZAÇÃO ==================

def test_penalized_monotone_and_bounded(put_field):
    """Teste de u_n crescente em n e limitado pela solução refletida"""
    spec, field = put_field
    low = solve_penalized_hjb(spec, field.t_grid, field.x_grid, 1.0, substeps=field.substeps)
    high = solve_penalized_hjb(spec, field.t_grid, field.x_grid, 16.0, substeps=field.substeps)

    assert np.all(low.u <= high.u + 1e-10)
    assert np.all(high.u <= field.u + 1e-10)
    assert np.max(field.u - high.u) < np.max(field.u - low.u)

# ================== TESTES DE RESÍDUO E HAMILTONIANO ==================

def test_residual_inactive_obstacle():
    """Teste de resíduo nulo para a solução linear"""
    spec, field = small_field('inactive_obstacle', params={'drift': 0.5})

    assert residual_check(field, spec) <= 1e-8

def test_residual_shrinks_under_refinement():
    """Teste de redução ≥ 1,5× do resíduo do put de (100, 200) para (200, 400)"""
    spec = builtin_problem('american_put')
    coarse = solve_hjb_fd(spec, np.linspace(0.0, 1.0, 101), np.linspace(20.0, 300.0, 201))
    fine = solve_hjb_fd(spec, np.linspace(0.0, 1.0, 201), np.linspace(20.0, 300.0, 401))
    r_coarse = residual_check(coarse, spec)
    r_fine = residual_check(fine, spec)

    assert r_fine > 0.0
    assert r_coarse / r_fine >= 1.5

def test_residual_window_excludes_terminal_layer(put_field):
    """Teste da janela padrão: t < T - TERMINAL_LAYER·T, contida na janela completa"""
    spec, field = put_field
    default = residual_check(field, spec)
    cut = residual_check(field, spec, t_max=(1.0 - TERMINAL_LAYER) * spec.horizon)
    full = residual_check(field, spec, t_max=spec.horizon)

    assert default == cut
    assert default <= full

def test_hamiltonian_linear_profile():
    """Teste de sup_v {v·Du} = vmax para u(x) = x"""
    spec = builtin_problem('controlled_drift')
    x = np.linspace(-6.0, 6.0, 41)
    controls = spec.control_grid()
    sup, arg = hamiltonian(spec, 0.0, x, x.copy(), controls)

    assert np.allclose(sup, 1.0)
    assert np.all(arg == len(controls) - 1)

def test_hamiltonian_cfl_check():
    """Teste da verificação CFL dentro do hamiltoniano"""
    spec = builtin_problem('controlled_drift')
    x = np.linspace(-6.0, 6.0, 41)
    with pytest.raises(CFLViolation):
        hamiltonian(spec, 0.0, x, x.copy(), spec.control_grid(), dt=0.1)

# ================== TESTES DE DESLOCAMENTO E ESCALA ==================

@pytest.mark.parametrize("name", ['controlled_drift', 'inactive_obstacle'])
def test_terminal_shift_exact_without_y_dependence(name):
    """Teste de Φ + c → u + c quando g não depende de y"""
    spec, field = small_field(name)
    moved = solve_hjb_fd(perturbed_problem(spec, 'terminal', 0.3), field.t_grid,
                         field.x_grid, substeps=field.substeps)

    assert np.allclose(moved.u - field.u, 0.3, atol=1e-9)

def test_terminal_shift_monotone_put(put_field):
    """Teste de 0 ≤ u_{Φ+c} - u ≤ c com g = -ry"""
    spec, field = put_field
    c = 0.5
    moved = solve_hjb_fd(perturbed_problem(spec, 'terminal', c), field.t_grid,
                         field.x_grid, substeps=field.substeps)
    shift = moved.u - field.u

    assert shift.min() >= -1e-12
    assert shift.max() <= c + 1e-12
    assert np.allclose(shift[-1], c)

@pytest.mark.parametrize("lam", [2.0, 5.0])
def test_argmax_invariant_under_positive_scaling(lam):
    """Teste do controle maximizador inalterado por (λΦ, λg, λh)"""
    base = builtin_problem('controlled_drift')
    spec = dataclasses.replace(
        base, driver=lambda t, x, y, z, v: -(v[..., 0] ** 2) + 0.0 * y)
    t_grid, x_grid = np.linspace(0.0, 1.0, 11), np.linspace(-6.0, 6.0, 41)
    field = solve_hjb_fd(spec, t_grid, x_grid)
    scaled = solve_hjb_fd(scaled_problem(spec, lam), t_grid, x_grid,
                          substeps=field.substeps)

    assert np.all(field.argmax_control[:-1] == 15)
    assert np.array_equal(scaled.argmax_control, field.argmax_control)
    assert np.allclose(scaled.u, lam * field.u, atol=1e-9)
    assert field.value_at(0.0, 0.0) == pytest.approx(0.25, abs=1e-9)

# ================== TESTES DE CONVERSÃO ==================

def test_value_field_from_reflected_lattice():
    """Teste do campo a partir do lattice com controle fixo"""
    spec, lattice = small_lattice('american_put')
    field = value_field_from_lattice(solve_reflected_lattice(lattice, spec), lattice)

    assert field.u.shape == (11, lattice.n_nodes)
    assert np.allclose(field.t_grid, np.linspace(0.0, 1.0, 11))
    assert np.all(field.argmax_control[:-1] == 0)
    assert np.all(field.argmax_control[-1] == -1)
    assert field.substeps == lattice.substeps

def test_value_field_from_optimal_lattice():
    """Teste do campo com a política ótima do lattice"""
    spec, lattice = small_lattice('controlled_drift')
    field = value_field_from_lattice(solve_optimal_lattice(lattice, spec), lattice)
    center = lattice.n_nodes // 2

    assert field.argmax_control[0, center] == lattice.n_controls - 1
    assert field.value_at(0.0, 0.0) == pytest.approx(1.0, abs=1e-6)

def test_dump_field_csv(tmp_path):
    """Teste da exportação do campo"""
    spec, field = small_field('constant_obstacle')
    path = tmp_path / "field.csv"

    assert dump_field_csv(field, str(path))
    rows = read_csv(str(path))
    assert list(rows[0]) == ['t', 'x', 'u', 'h', 'active_flag', 'argmax_control']
    assert len(rows) == 11 * 41
    assert rows[0]['active_flag'] == '1'
