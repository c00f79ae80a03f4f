# -*- coding: utf-8 -*-
"""
Configuração de execução - documento JSON plano (ver docs/config_schema.md).
"""

from typing import Any, Dict, List, Optional, Tuple
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

from src.models.problem import ProblemSpec
from src.processing.problems import builtin_problem
from src.utils.exceptions import ConfigParseError, SolverError
from src.utils.validators import required_substeps

logger = logging.getLogger(__name__)

VALID_SUITES = ('oracle', 'invariants', 'penalization', 'dpp', 'regularity',
                'bruteforce', 'stability')

DEFAULT_PENALTY_LADDER = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
DEFAULT_CONTROL_COUNT = 21

# Tolerâncias declaradas de cada critério (sobrescrevíveis no documento)
DEFAULT_TOLERANCES: Dict[str, float] = {
    'oracle_rel': 5e-3,
    'mc_rel': 1.5e-2,
    'controlled_abs': 2e-2,
    'cross_solver_rel': 1e-2,
    'skorokhod': 1e-9,
    'comparison': 1e-12,
    'dpp_lattice': 1e-12,
    'dpp_cross_rel': 1e-2,
    'dpp_shrink': 1.5,
    'partition_abs': 5e-2,
    'residual_shrink': 1.5,
    'bruteforce': 1e-12,
    'stability_slope': 0.45,
    'regularity_factor': 2.0,
    'apriori_margin': 1e-9,
    'joint_margin': 1e-9,
}


@dataclass(frozen=True)
class GridSpec:
    """Grade de relatório (Nt passos, Nx intervalos) sobre [x_lo, x_hi]."""

    Nt: int
    Nx: int
    x_lo: float
    x_hi: float

    def to_dict(self) -> Dict[str, Any]:
        return {'Nt': self.Nt, 'Nx': self.Nx, 'x_lo': self.x_lo, 'x_hi': self.x_hi}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GridSpec':
        return cls(Nt=int(data['Nt']), Nx=int(data['Nx']),
                   x_lo=float(data['x_lo']), x_hi=float(data['x_hi']))


@dataclass
class RunConfig:
    """Configuração completa de uma execução de suítes."""

    problem_name: str
    problem_params: Dict[str, Any]
    grids: List[GridSpec]
    suites: List[str]
    control_grid_count: int = DEFAULT_CONTROL_COUNT
    penalty_ladder: List[float] = field(default_factory=lambda: list(DEFAULT_PENALTY_LADDER))
    seed: int = 0
    output_dir: str = 'results'
    tolerances: Dict[str, float] = field(default_factory=dict)
    dpp_delta: Optional[float] = None
    sample_points: Optional[List[Tuple[float, float]]] = None

    def __post_init__(self):
        if not self.suites:
            raise ValueError("Pelo menos uma suíte deve ser declarada")
        unknown = [s for s in self.suites if s not in VALID_SUITES]
        if unknown:
            raise ValueError(f"Suítes desconhecidas: {unknown} (válidas: {list(VALID_SUITES)})")
        if not self.grids:
            raise ValueError("Pelo menos uma grade deve ser declarada")
        for g in self.grids:
            if g.Nt < 1 or g.Nx < 4:
                raise ValueError(f"Grade inválida: {g.to_dict()}")
            if not g.x_hi > g.x_lo:
                raise ValueError(f"Domínio degenerado: [{g.x_lo}, {g.x_hi}]")
        if self.control_grid_count < 1:
            raise ValueError(f"control_grid_count deve ser ≥ 1: {self.control_grid_count}")
        if not self.penalty_ladder or any(n < 0 for n in self.penalty_ladder):
            raise ValueError(f"Escada de penalidades inválida: {self.penalty_ladder}")
        unknown_tol = [k for k in self.tolerances if k not in DEFAULT_TOLERANCES]
        if unknown_tol:
            raise ValueError(f"Tolerâncias desconhecidas: {unknown_tol}")

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def build_problem(self) -> ProblemSpec:
        return builtin_problem(self.problem_name, self.problem_params)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'problem': {'name': self.problem_name, 'params': dict(self.problem_params)},
            'grids': [g.to_dict() for g in self.grids],
            'control_grid_count': self.control_grid_count,
            'penalty_ladder': list(self.penalty_ladder),
            'suites': list(self.suites),
            'seed': self.seed,
            'output_dir': self.output_dir,
            'tolerances': dict(self.tolerances),
            'dpp_delta': self.dpp_delta,
            'sample_points': ([list(p) for p in self.sample_points]
                              if self.sample_points is not None else None),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        problem = data['problem']
        points = data.get('sample_points')
        return cls(
            problem_name=str(problem['name']),
            problem_params=dict(problem.get('params', {})),
            grids=[GridSpec.from_dict(g) for g in data['grids']],
            suites=list(data['suites']),
            control_grid_count=int(data.get('control_grid_count', DEFAULT_CONTROL_COUNT)),
            penalty_ladder=[float(n) for n in data.get('penalty_ladder',
                                                       DEFAULT_PENALTY_LADDER)],
            seed=int(data.get('seed', 0)),
            output_dir=str(data.get('output_dir', 'results')),
            tolerances={k: float(v) for k, v in data.get('tolerances', {}).items()},
            dpp_delta=float(data['dpp_delta']) if data.get('dpp_delta') is not None else None,
            sample_points=([(float(t), float(x)) for t, x in points]
                           if points is not None else None),
        )


def parse_run_config(text: str, path: Optional[str] = None) -> RunConfig:
    """
    Interpreta o documento de configuração.

    Raises:
        ConfigParseError: JSON malformado (linha/coluna do erro) ou
            conteúdo inválido (linha/coluna 0)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(e.msg, e.lineno, e.colno, path) from e
    if not isinstance(data, dict):
        raise ConfigParseError("Documento deve ser um objeto JSON", path=path)
    try:
        config = RunConfig.from_dict(data)
        config.build_problem()
    except KeyError as e:
        raise ConfigParseError(f"Chave obrigatória ausente: {e.args[0]}", path=path) from e
    except (TypeError, ValueError) as e:
        raise ConfigParseError(str(e), path=path) from e
    return config


def load_run_config(path: str) -> RunConfig:
    """Carrega e valida o documento de configuração em `path`."""
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigParseError("Arquivo não encontrado", path=str(path))
    config = parse_run_config(file_path.read_text(encoding='utf-8'), str(path))
    logger.info("✅ Configuração carregada: %s (%d suítes)", config.problem_name,
                len(config.suites))
    return config


def check_grid(spec: ProblemSpec, grid: GridSpec,
               control_count: Optional[int] = None) -> Dict[str, int]:
    """
    Pré-checagem CFL de uma grade para os dois esquemas explícitos.

    Returns:
        {'lattice': subpassos, 'hjb': subpassos}

    Raises:
        ConfigParseError: grade inviável
    """
    try:
        return {
            scheme: required_substeps(spec, 0.0, spec.horizon, grid.Nt, grid.x_lo, grid.x_hi,
                                      grid.Nx, scheme=scheme, control_count=control_count)
            for scheme in ('lattice', 'hjb')
        }
    except SolverError as e:
        raise ConfigParseError(f"Grade {grid.to_dict()} inviável: {e}") from e
