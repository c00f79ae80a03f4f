# -*- coding: utf-8 -*-
"""
Testes unitários para o documento de configuração

Execute com: pytest tests/unit/test_config.py
"""

import json

import pytest

from src.processing.problems import builtin_problem
from src.utils.config import (
    DEFAULT_CONTROL_COUNT, DEFAULT_PENALTY_LADDER, GridSpec, RunConfig, check_grid,
    load_run_config, parse_run_config,
)
from src.utils.exceptions import ConfigParseError
from tests.fixtures.builders import config_document, write_config

# ================== FIXTURES ==================

@pytest.fixture
def document(tmp_path):
    """Documento mínimo válido"""
    return config_document(tmp_path / "out")

# ================== TESTES DE INTERPRETAÇÃO ==================

def test_parse_valid_document(document):
    """Teste de documento válido com valores padrão"""
    config = parse_run_config(json.dumps(document))

    assert config.problem_name == 'constant_obstacle'
    assert config.grids == [GridSpec(Nt=10, Nx=20, x_lo=-6.0, x_hi=6.0)]
    assert config.control_grid_count == DEFAULT_CONTROL_COUNT
    assert config.penalty_ladder == DEFAULT_PENALTY_LADDER
    assert config.dpp_delta is None
    assert config.tolerance('oracle_rel') == 5e-3

def test_tolerance_override(document):
    """Teste de tolerância sobrescrita no documento"""
    document['tolerances'] = {'oracle_rel': 0.01}
    config = parse_run_config(json.dumps(document))

    assert config.tolerance('oracle_rel') == 0.01
    assert config.tolerance('mc_rel') == 1.5e-2

def test_malformed_json_reports_line():
    """Teste de JSON malformado com linha do erro"""
    text = '{\n  "problem": ,\n}'
    with pytest.raises(ConfigParseError) as exc_info:
        parse_run_config(text, 'broken.json')

    assert exc_info.value.line == 2
    assert exc_info.value.path == 'broken.json'

def test_document_must_be_object():
    """Teste de documento que não é objeto"""
    with pytest.raises(ConfigParseError):
        parse_run_config('[1, 2, 3]')

@pytest.mark.parametrize("suites", [[], ["oracle", "unknown"]])
def test_invalid_suites(document, suites):
    """Teste de lista de suítes vazia ou desconhecida"""
    document['suites'] = suites
    with pytest.raises(ConfigParseError):
        parse_run_config(json.dumps(document))

def test_unknown_problem(document):
    """Teste de problema não registrado"""
    document['problem'] = {'name': 'asian_call'}
    with pytest.raises(ConfigParseError):
        parse_run_config(json.dumps(document))

def test_invalid_problem_params(document):
    """Teste de parâmetro desconhecido do problema"""
    document['problem'] = {'name': 'american_put', 'params': {'strike': 100.0}}
    with pytest.raises(ConfigParseError):
        parse_run_config(json.dumps(document))

def test_missing_key(document):
    """Teste de chave obrigatória ausente"""
    del document['grids']
    with pytest.raises(ConfigParseError) as exc_info:
        parse_run_config(json.dumps(document))

    assert 'grids' in str(exc_info.value)

@pytest.mark.parametrize("grid", [
    {"Nt": 0, "Nx": 20, "x_lo": -6.0, "x_hi": 6.0},
    {"Nt": 10, "Nx": 3, "x_lo": -6.0, "x_hi": 6.0},
    {"Nt": 10, "Nx": 20, "x_lo": 6.0, "x_hi": -6.0},
])
def test_invalid_grid(document, grid):
    """Teste de grades inválidas"""
    document['grids'] = [grid]
    with pytest.raises(ConfigParseError):
        parse_run_config(json.dumps(document))

def test_unknown_tolerance(document):
    """Teste de tolerância desconhecida"""
    document['tolerances'] = {'typo_rel': 0.1}
    with pytest.raises(ConfigParseError):
        parse_run_config(json.dumps(document))

# ================== TESTES DE ARQUIVO ==================

def test_load_from_file(document, tmp_path):
    """Teste de carregamento a partir de arquivo"""
    path = write_config(tmp_path / "config.json", document)
    config = load_run_config(path)

    assert config.suites == ['invariants']
    assert config.output_dir == str(tmp_path / "out")

def test_load_missing_file(tmp_path):
    """Teste de arquivo inexistente"""
    with pytest.raises(ConfigParseError):
        load_run_config(str(tmp_path / "missing.json"))

def test_round_trip(document):
    """Teste de to_dict → from_dict"""
    document['sample_points'] = [[0.0, 1.0]]
    document['dpp_delta'] = 0.5
    config = parse_run_config(json.dumps(document))
    restored = RunConfig.from_dict(config.to_dict())

    assert restored == config
    assert restored.sample_points == [(0.0, 1.0)]

# ================== TESTES DE PRÉ-CHECAGEM CFL ==================

def test_check_grid_put():
    """Teste dos subpassos do put na grade (200, 400)"""
    spec = builtin_problem('american_put')
    substeps = check_grid(spec, GridSpec(Nt=200, Nx=400, x_lo=20.0, x_hi=300.0))

    assert substeps == {'lattice': 37, 'hjb': 74}

def test_check_grid_infeasible():
    """Teste de grade inviável convertida em erro de configuração"""
    spec = builtin_problem('american_put')
    with pytest.raises(ConfigParseError):
        check_grid(spec, GridSpec(Nt=1, Nx=100000, x_lo=20.0, x_hi=300.0))
