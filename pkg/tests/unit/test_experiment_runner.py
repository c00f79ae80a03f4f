# -*- coding: utf-8 -*-
"""
Testes unitários para ExperimentRunner e a comparação de relatórios

Execute com: pytest tests/unit/test_experiment_runner.py
"""

import pytest

from src.controllers.experiment_runner import (
    REPORT_FILE, ExperimentReport, ExperimentRunner, SuiteResult, SuiteStatus, report_diff, run,
)
from src.processing.persistence import ReportPersistence
from src.utils.config import RunConfig
from src.utils.exceptions import ConfigParseError, KeyMismatch
from tests.fixtures.builders import config_document

# ================== FIXTURES ==================

@pytest.fixture
def make_config(tmp_path):
    """Fábrica de RunConfig com o documento mínimo"""
    def _make(out="out", **overrides):
        return RunConfig.from_dict(config_document(tmp_path / out, **overrides))
    return _make

def _report(metrics, passed=True, names=('oracle',)):
    suites = [SuiteResult(name=n, inputs_digest='x', metrics=dict(metrics),
                          checks={'ok': passed}) for n in names]
    return ExperimentReport(problem={'name': 'constant_obstacle'}, seed=0, suites=suites)

# ================== TESTES DE STATUS ==================

def test_suite_status_display_names():
    """Teste dos nomes de exibição"""
    assert SuiteStatus.PASSED.get_display_name() == "✅ ok"
    assert SuiteStatus.FAILED.get_display_name() == "❌ falhou"
    assert SuiteStatus.ERROR.get_display_name() == "❌ erro"

def test_suite_result_status():
    """Teste do status derivado de checks e erro"""
    assert SuiteResult('a', 'x', checks={'c': True}).status == SuiteStatus.PASSED
    assert SuiteResult('a', 'x', checks={'c': False}).status == SuiteStatus.FAILED
    assert SuiteResult('a', 'x', error="CFLViolation").status == SuiteStatus.ERROR

def test_suite_result_round_trip():
    """Teste de to_dict → from_dict com tempo normalizado"""
    result = SuiteResult('oracle', 'abc', metrics={'v': 1.0}, checks={'c': True},
                         wall_time=3.5)
    data = result.to_dict(normalize_timestamps=True)
    restored = SuiteResult.from_dict(data)

    assert data['wall_time'] == 0.0
    assert data['status'] == 'passed'
    assert restored.metrics == {'v': 1.0}
    assert restored.passed

def test_report_missing_suite():
    """Teste de suíte ausente do relatório"""
    with pytest.raises(KeyMismatch):
        _report({}).suite('dpp')

# ================== TESTES DE EXECUÇÃO ==================

def test_run_invariants_constant_obstacle(make_config, tmp_path):
    """Teste da suíte de invariantes com massa de reflexão nula"""
    report = run(make_config())
    suite = report.suite('invariants')

    assert report.passed
    assert suite.metrics['k_mass'] == pytest.approx(0.0, abs=1e-12)
    assert suite.metrics['comparison_violation'] <= 1e-12
    assert suite.checks['zero_k_mass']
    assert suite.metrics['hjb_residual'] == pytest.approx(0.0, abs=1e-12)
    assert 'hjb_residual_shrink' not in suite.metrics
    assert (tmp_path / "out" / REPORT_FILE).exists()
    assert report.fields == ['fields/lattice_solution.csv', 'fields/hjb_field.csv']
    assert (tmp_path / "out" / "fields" / "lattice_solution.csv").exists()

def test_run_oracle_and_bruteforce(make_config):
    """Teste das suítes de oráculo e de enumeração exaustiva"""
    report = run(make_config(suites=["oracle", "bruteforce"]))

    assert [s.name for s in report.suites] == ["oracle", "bruteforce"]
    assert report.suite('oracle').checks['constant']
    assert report.suite('bruteforce').metrics['max_gap'] <= 1e-12
    assert report.passed
    assert 'fields/hjb_field.csv' in report.fields

def test_run_dpp_partition_single_control(make_config):
    """Teste da concatenação na suíte dpp: controle único dá discrepância nula"""
    report = run(make_config(suites=["dpp"]))
    dpp = report.suite('dpp')

    assert dpp.metrics['partition_gap'] == 0.0
    assert dpp.metrics['partition_gap_degenerate'] == 0.0
    assert dpp.checks['partition_concat']
    assert dpp.checks['partition_degenerate']

def test_run_penalization_and_stability_put(make_config):
    """Teste dos critérios de janela compacta e de estabilidade conjunta no put"""
    grid = {"Nt": 10, "Nx": 56, "x_lo": 20.0, "x_hi": 300.0}
    report = run(make_config(problem={"name": "american_put"}, grids=[grid],
                             suites=["penalization", "stability"]))
    penalization = report.suite('penalization')
    stability = report.suite('stability')

    assert penalization.checks['uniform_on_compact']
    assert penalization.metrics['compact_gap_n256'] <= penalization.metrics['compact_gap_n1']
    assert stability.checks['joint_stability']
    assert stability.metrics['joint_constant'] > 0.0
    assert stability.metrics['joint_ratio_0.01'] <= stability.metrics['joint_ratio_1']
    assert 'joint_control_ratio' not in stability.metrics

def test_misaligned_dpp_delta_records_error(make_config):
    """Teste de δ desalinhado: erro registrado e execução continua"""
    report = run(make_config(suites=["dpp", "invariants"], dpp_delta=0.0123))
    dpp = report.suite('dpp')

    assert dpp.status == SuiteStatus.ERROR
    assert 'MisalignedWindow' in dpp.error
    assert report.suite('invariants').passed
    assert not report.passed

def test_infeasible_grid_rejected_before_suites(make_config):
    """Teste da pré-checagem CFL na construção do executor"""
    config = make_config(problem={"name": "american_put"},
                         grids=[{"Nt": 1, "Nx": 100000, "x_lo": 20.0, "x_hi": 300.0}])
    with pytest.raises(ConfigParseError):
        ExperimentRunner(config)

def test_normalized_reports_are_byte_identical(make_config, tmp_path):
    """Teste de reprodutibilidade byte a byte com carimbos normalizados"""
    run(make_config("a"), normalize_timestamps=True)
    run(make_config("b"), normalize_timestamps=True)
    a = (tmp_path / "a" / REPORT_FILE).read_bytes()
    b = (tmp_path / "b" / REPORT_FILE).read_bytes()

    assert a == b
    assert b'"created_at": "1970-01-01T00:00:00"' in a

def test_saved_report_loads_back(make_config, tmp_path):
    """Teste de carregamento do relatório salvo"""
    report = run(make_config())
    loaded = ExperimentReport.from_dict(ReportPersistence.load(str(tmp_path / "out" / REPORT_FILE)))

    assert [s.name for s in loaded.suites] == ['invariants']
    assert loaded.suite('invariants').metrics == report.suite('invariants').metrics
    assert report_diff(report, loaded) == ""

# ================== TESTES DE COMPARAÇÃO ==================

def test_report_diff_identical():
    """Teste de relatórios idênticos"""
    assert report_diff(_report({'v': 1.0}), _report({'v': 1.0})) == ""

def test_report_diff_changed_metric():
    """Teste de métrica alterada e mudança de aprovação"""
    text = report_diff(_report({'v': 1.0, 'w': None}), _report({'v': 1.5, 'w': 2.0}, False))
    lines = text.splitlines()

    assert lines[0] == "oracle.v: 1 -> 1.5 (Δ +0.5)"
    assert lines[1] == "oracle.w: None -> 2"
    assert lines[2] == "oracle.passed: True -> False"

def test_report_diff_disjoint_suites():
    """Teste de relatórios com suítes diferentes"""
    with pytest.raises(KeyMismatch):
        report_diff(_report({}, names=('oracle',)), _report({}, names=('dpp',)))
