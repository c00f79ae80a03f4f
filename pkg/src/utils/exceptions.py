# -*- coding: utf-8 -*-
"""
Exceções do solver.

Todas derivam de SolverError. Erros de entrada inválida também derivam de
ValueError, para que chamadores que já tratam ValueError continuem
funcionando.
"""

from typing import Optional, Sequence


class SolverError(Exception):
    """Erro base de todos os módulos do pacote."""


# ========== PROBLEMA ==========

class NonFiniteCoefficient(SolverError):
    """Um coeficiente retornou NaN/∞ em algum ponto de sondagem."""

    def __init__(self, coefficient: str, probe: Sequence[float]):
        self.coefficient = coefficient
        self.probe = tuple(probe)
        super().__init__(f"Coeficiente '{coefficient}' não finito em {self.probe}")


class UnknownProblem(SolverError, ValueError):
    """Nome de problema embutido desconhecido."""


class InvalidParams(SolverError, ValueError):
    """Parâmetros fora do domínio permitido."""


# ========== GRADES ==========

class CFLViolation(SolverError, ValueError):
    """Passo de tempo grande demais para o esquema explícito."""

    def __init__(self, node: int, control: int, ratio: float, limit: float):
        self.node = node
        self.control = control
        self.ratio = ratio
        self.limit = limit
        super().__init__(
            f"CFL violada no nó {node}, controle {control}: "
            f"{ratio:.6g} > {limit:.6g} (refine Δt ou aumente Δx)"
        )


class DegenerateDomain(SolverError, ValueError):
    """Domínio espacial vazio (x_hi ≤ x_lo) ou grade pequena demais."""


class IndexOutOfRange(SolverError, IndexError):
    """Índice de tempo, nó ou controle fora da grade."""


# ========== SIMULAÇÃO ==========

class NonFiniteState(SolverError):
    """Estado explodiu durante a recursão de Euler."""

    def __init__(self, path: int, step: int):
        self.path = path
        self.step = step
        super().__init__(f"Estado não finito no caminho {path}, passo {step}")


# ========== SOLVERS ==========

class TerminalObstacleConflict(SolverError, ValueError):
    """Condição terminal abaixo do obstáculo no instante final."""


class NonFiniteDriver(SolverError):
    """O driver g retornou NaN/∞ durante a indução retroativa."""


class NonFiniteValue(SolverError):
    """O campo de valor deixou de ser finito durante a marcha no tempo."""


class SingularRegression(SolverError):
    """Matriz de desenho degenerada na regressão Monte Carlo."""


class ShapeMismatch(SolverError, ValueError):
    """Duas soluções não estão na mesma grade."""


class WindowMismatch(SolverError, ValueError):
    """O lattice não cobre exatamente a janela [t, t+δ] pedida."""


class MisalignedWindow(SolverError, ValueError):
    """δ ou t não estão alinhados à grade de tempo do campo de valor."""


class ExplosionGuard(SolverError, ValueError):
    """Enumeração exaustiva grande demais."""


# ========== CONFIGURAÇÃO / RELATÓRIOS ==========

class ConfigParseError(SolverError, ValueError):
    """Documento de configuração malformado ou inválido."""

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 path: Optional[str] = None):
        self.line = line
        self.column = column
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}{line}:{column}: {message}")


class KeyMismatch(SolverError, KeyError):
    """Relatórios com conjuntos de suítes diferentes."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "KeyMismatch"
