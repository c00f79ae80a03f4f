# -*- coding: utf-8 -*-
"""
Testes unitários para os oráculos independentes

Execute com: pytest tests/unit/test_calculations.py
"""

import pytest

from src.processing.calculations import (
    black_scholes_put, controlled_drift_value, crr_american_put, relative_error,
)
from src.utils.exceptions import InvalidParams

# ================== TESTES DA ÁRVORE CRR ==================

def test_crr_reference_value():
    """Teste do put americano de referência (S0 = K = 100, r = 5%, σ = 20%)"""
    assert crr_american_put(100.0, 100.0, 0.05, 0.2, 1.0) == pytest.approx(6.090, abs=0.01)

def test_american_above_european():
    """Teste do prêmio de exercício antecipado"""
    american = crr_american_put(100.0, 100.0, 0.05, 0.2, 1.0, steps=2000)
    european = black_scholes_put(100.0, 100.0, 0.05, 0.2, 1.0)

    assert american > european

def test_crr_zero_rate_matches_european():
    """Teste de r = 0: sem exercício antecipado"""
    american = crr_american_put(100.0, 100.0, 0.0, 0.2, 1.0)
    european = black_scholes_put(100.0, 100.0, 0.0, 0.2, 1.0)

    assert american == pytest.approx(european, abs=1e-2)

def test_crr_deep_in_the_money_is_intrinsic():
    """Teste de exercício imediato bem dentro do dinheiro"""
    assert crr_american_put(20.0, 100.0, 0.05, 0.2, 1.0, steps=500) == pytest.approx(80.0)

def test_crr_invalid_params():
    """Teste de parâmetros inválidos"""
    with pytest.raises(InvalidParams):
        crr_american_put(100.0, 100.0, 0.05, 0.0, 1.0)
    with pytest.raises(InvalidParams):
        crr_american_put(100.0, 100.0, 0.05, 0.2, 1.0, steps=0)

def test_crr_probability_out_of_range():
    """Teste de probabilidade neutra ao risco fora de (0, 1)"""
    with pytest.raises(InvalidParams):
        crr_american_put(100.0, 100.0, 5.0, 0.2, 1.0, steps=1)

# ================== TESTES DE BLACK-SCHOLES ==================

def test_black_scholes_reference_value():
    """Teste do put europeu de referência"""
    assert black_scholes_put(100.0, 100.0, 0.05, 0.2, 1.0) == pytest.approx(5.5735, abs=1e-3)

def test_black_scholes_invalid_params():
    """Teste de maturidade nula"""
    with pytest.raises(InvalidParams):
        black_scholes_put(100.0, 100.0, 0.05, 0.2, 0.0)

# ================== TESTES DO DRIFT CONTROLADO ==================

def test_controlled_drift_value():
    """Teste de u(t, x) = x + vmax·(T - t)"""
    assert controlled_drift_value(0.0, 0.0, 1.0, 1.0) == 1.0
    assert controlled_drift_value(2.0, 0.5, 2.0, 1.0) == 3.0

def test_relative_error():
    """Teste do erro relativo"""
    assert relative_error(1.01, 1.0) == pytest.approx(0.01)
    assert relative_error(-0.99, -1.0) == pytest.approx(0.01)
