# -*- coding: utf-8 -*-
"""
ExperimentRunner - Execução das suítes de verificação declaradas na
configuração.

Suítes disponíveis:
- oracle: valores contra oráculos independentes e concordância entre rotas
- invariants: Skorokhod, massa de reflexão, comparação com dados sorteados,
  resíduo da HJB no refinamento
- penalization: escada de penalidades no lattice e no HJB, convergência
  uniforme na janela interior
- dpp: programação dinâmica no lattice e cruzada (campo HJB como terminal),
  concatenação de controles sobre uma partição
- regularity: razões de Lipschitz, Hölder e crescimento
- bruteforce: problema misto enumerado em árvores pequenas
- stability: taxa sob deslocamento do obstáculo, estimativa a priori e
  estabilidade conjunta em (ponto inicial, controle)
"""

from typing import Any, Callable, Dict, List, Optional, Tuple
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
import hashlib
import json
import logging
import time

import numpy as np

from src.models.lattice import Lattice
from src.models.report import DPPReport
from src.models.solution import RBSDESolution, ValueField
from src.processing.calculations import (
    black_scholes_put, controlled_drift_value, crr_american_put, relative_error,
)
from src.processing.dpp import (
    dpp_check, dump_dpp_csv, mixed_bruteforce, partition_concat_check, regularity_check,
    tabulated_tree,
)
from src.processing.forward_sim import simulate
from src.processing.hjb import (
    dump_field_csv, residual_check, solve_hjb_fd, solve_penalized_hjb,
    value_field_from_lattice,
)
from src.processing.lattice import build_lattice
from src.processing.persistence import ReportPersistence
from src.processing.problems import (
    builtin_problem, list_problems, suggested_domain, suggested_x0,
)
from src.processing.rbsde import (
    apriori_sides, comparison_check, dump_solution_csv, fitted_constant,
    joint_stability_sides, ordered_problems, penalty_ladder, perturbed_problem,
    scaled_problem, skorokhod_residual, solve_optimal_lattice, solve_rbsde_mc,
    solve_reflected_lattice, stability_sides, sup_gap,
)
from src.utils.config import RunConfig, check_grid
from src.utils.exceptions import KeyMismatch, SolverError

logger = logging.getLogger(__name__)

NORMALIZED_TIMESTAMP = "1970-01-01T00:00:00"
REPORT_FILE = "report.json"

# Tamanhos fixos das suítes
RANDOM_TRIPLES = 50
TREE_COUNT = 10
COARSE_GRID = (10, 20)
MC_PATHS = 100000
MC_STEPS = 50
ESTIMATE_PATHS = 5000
OBSTACLE_SHIFTS = (1e-1, 1e-2, 1e-3)
TERMINAL_SHIFT = 1e-2
DATA_SCALINGS = (1.0, 2.0, 5.0, 10.0)
REFERENCE_PENALTY = 64.0
PARTITION_PATHS = 10000
PARTITION_STEPS = 50
JOINT_DISTANCES = (1.0, 1e-1, 1e-2)
RESIDUAL_FLOOR = 1e-8

Metrics = Dict[str, Optional[float]]
Checks = Dict[str, bool]


class SuiteStatus(Enum):
    """Resultado de uma suíte."""

    PASSED = "passed"    # Todas as verificações dentro da tolerância
    FAILED = "failed"    # Alguma verificação fora da tolerância
    ERROR = "error"      # A suíte levantou um erro do solver

    def get_display_name(self) -> str:
        names = {
            SuiteStatus.PASSED: "✅ ok",
            SuiteStatus.FAILED: "❌ falhou",
            SuiteStatus.ERROR: "❌ erro",
        }
        return names[self]


@dataclass
class SuiteResult:
    """Registro de uma suíte no relatório."""

    name: str
    inputs_digest: str
    metrics: Metrics = field(default_factory=dict)
    checks: Checks = field(default_factory=dict)
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    @property
    def status(self) -> SuiteStatus:
        if self.error is not None:
            return SuiteStatus.ERROR
        return SuiteStatus.PASSED if self.passed else SuiteStatus.FAILED

    def to_dict(self, normalize_timestamps: bool = False) -> Dict[str, Any]:
        return {
            'name': self.name,
            'inputs_digest': self.inputs_digest,
            'metrics': dict(self.metrics),
            'checks': dict(self.checks),
            'passed': self.passed,
            'status': self.status.value,
            'wall_time': 0.0 if normalize_timestamps else self.wall_time,
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SuiteResult':
        return cls(
            name=data['name'],
            inputs_digest=data.get('inputs_digest', ''),
            metrics=dict(data.get('metrics', {})),
            checks={k: bool(v) for k, v in data.get('checks', {}).items()},
            wall_time=float(data.get('wall_time', 0.0)),
            error=data.get('error'),
        )


@dataclass
class ExperimentReport:
    """Relatório completo de uma execução, suítes na ordem declarada."""

    problem: Dict[str, Any]
    seed: int
    suites: List[SuiteResult] = field(default_factory=list)
    fields: List[str] = field(default_factory=list)
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def suite(self, name: str) -> SuiteResult:
        for s in self.suites:
            if s.name == name:
                return s
        raise KeyMismatch(f"Suíte ausente do relatório: {name}")

    def to_dict(self, normalize_timestamps: bool = False) -> Dict[str, Any]:
        return {
            'problem': self.problem,
            'seed': self.seed,
            'passed': self.passed,
            'suites': [s.to_dict(normalize_timestamps) for s in self.suites],
            'fields': list(self.fields),
            'created_at': NORMALIZED_TIMESTAMP if normalize_timestamps else self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentReport':
        return cls(
            problem=dict(data.get('problem', {})),
            seed=int(data.get('seed', 0)),
            suites=[SuiteResult.from_dict(s) for s in data.get('suites', [])],
            fields=list(data.get('fields', [])),
            created_at=data.get('created_at', NORMALIZED_TIMESTAMP),
        )


def _digest(payload: Dict[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


def _num(value) -> Optional[float]:
    """Métrica serializável: float finito ou None."""
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


class ExperimentRunner:
    """
    Executor sequencial das suítes de uma RunConfig.

    Lattices, soluções e campos HJB de cada grade são construídos uma vez e
    compartilhados entre as suítes.
    """

    def __init__(self, config: RunConfig, normalize_timestamps: bool = False):
        self.config = config
        self.normalize_timestamps = normalize_timestamps
        self.spec = config.build_problem()
        self.x0 = suggested_x0(self.spec)

        # Pré-checagem CFL de todas as grades antes de qualquer suíte
        self.substeps = [check_grid(self.spec, g, config.control_grid_count)
                         for g in config.grids]

        # Cache por índice de grade
        self._lattices: Dict[int, Lattice] = {}
        self._solutions: Dict[int, RBSDESolution] = {}
        self._fields: Dict[int, ValueField] = {}
        self._dpp_report: Optional[DPPReport] = None

        self.suite_methods: Dict[str, Callable[[], Tuple[Metrics, Checks]]] = {
            'oracle': self._suite_oracle,
            'invariants': self._suite_invariants,
            'penalization': self._suite_penalization,
            'dpp': self._suite_dpp,
            'regularity': self._suite_regularity,
            'bruteforce': self._suite_bruteforce,
            'stability': self._suite_stability,
        }
        logger.info("✅ ExperimentRunner inicializado (%s, %d grades)",
                    self.spec.name, len(config.grids))

    # ========== EXECUÇÃO ==========

    def run(self) -> ExperimentReport:
        """Executa as suítes na ordem declarada e grava relatório e campos."""
        report = ExperimentReport(
            problem={'name': self.spec.name, 'params': dict(self.spec.params)},
            seed=self.config.seed,
        )
        for name in self.config.suites:
            report.suites.append(self._run_suite(name))
        report.fields = self._write_fields()
        output = Path(self.config.output_dir) / REPORT_FILE
        if ReportPersistence.save(report.to_dict(self.normalize_timestamps), str(output)):
            logger.info("✅ Relatório salvo em %s", output)
        return report

    def _run_suite(self, name: str) -> SuiteResult:
        result = SuiteResult(name=name, inputs_digest=self._inputs_digest(name))
        logger.info("🔬 Suíte %s iniciada", name)
        start = time.perf_counter()
        try:
            metrics, checks = self.suite_methods[name]()
            result.metrics = {k: _num(v) for k, v in metrics.items()}
            result.checks = {k: bool(v) for k, v in checks.items()}
        except (SolverError, np.linalg.LinAlgError) as e:
            result.error = f"{type(e).__name__}: {e}"
            logger.error("❌ Suíte %s: %s", name, result.error)
        result.wall_time = time.perf_counter() - start
        logger.info("%s Suíte %s concluída em %.2f s",
                    "✅" if result.passed else "❌", name, result.wall_time)
        return result

    def _inputs_digest(self, name: str) -> str:
        data = self.config.to_dict()
        data.pop('output_dir')
        data.pop('suites')
        data['suite'] = name
        return _digest(data)

    def _write_fields(self) -> List[str]:
        out = Path(self.config.output_dir) / 'fields'
        written = []
        if 0 in self._solutions:
            path = out / 'lattice_solution.csv'
            if dump_solution_csv(self._solutions[0], str(path)):
                written.append(str(path.relative_to(self.config.output_dir)))
        if 0 in self._fields:
            path = out / 'hjb_field.csv'
            if dump_field_csv(self._fields[0], str(path)):
                written.append(str(path.relative_to(self.config.output_dir)))
        if self._dpp_report is not None:
            path = out / 'dpp_gaps.csv'
            if dump_dpp_csv(self._dpp_report, str(path)):
                written.append(str(path.relative_to(self.config.output_dir)))
        return written

    # ========== OBJETOS COMPARTILHADOS ==========

    @property
    def controlled(self) -> bool:
        return len(self.spec.control_grid(self.config.control_grid_count)) > 1

    def lattice(self, k: int = 0) -> Lattice:
        if k not in self._lattices:
            g = self.config.grids[k]
            self._lattices[k] = build_lattice(
                self.spec, 0.0, self.spec.horizon, g.Nt, g.x_lo, g.x_hi, g.Nx,
                substeps=self.substeps[k]['lattice'],
                control_count=self.config.control_grid_count)
        return self._lattices[k]

    def _solve(self, lattice: Lattice, spec=None) -> RBSDESolution:
        spec = self.spec if spec is None else spec
        if self.controlled:
            return solve_optimal_lattice(lattice, spec)
        return solve_reflected_lattice(lattice, spec)

    def solution(self, k: int = 0) -> RBSDESolution:
        """Função valor no lattice da grade k."""
        if k not in self._solutions:
            self._solutions[k] = self._solve(self.lattice(k))
        return self._solutions[k]

    def hjb_field(self, k: int = 0) -> ValueField:
        if k not in self._fields:
            g = self.config.grids[k]
            self._fields[k] = solve_hjb_fd(
                self.spec, np.linspace(0.0, self.spec.horizon, g.Nt + 1),
                np.linspace(g.x_lo, g.x_hi, g.Nx + 1),
                substeps=self.substeps[k]['hjb'],
                control_count=self.config.control_grid_count)
        return self._fields[k]

    def _interior(self, x_grid: np.ndarray) -> np.ndarray:
        """Janela interior: [0.75K, 1.5K] para puts, metade central nos demais."""
        if 'K' in self.spec.params:
            K = float(self.spec.params['K'])
            return (x_grid >= 0.75 * K) & (x_grid <= 1.5 * K)
        lo, hi = float(x_grid[0]), float(x_grid[-1])
        quarter = 0.25 * (hi - lo)
        return (x_grid >= lo + quarter) & (x_grid <= hi - quarter)

    def _start_node(self, lattice: Lattice) -> int:
        return int(np.argmin(np.abs(lattice.x_grid - self.x0)))

    def _sample_points(self) -> List[Tuple[float, float]]:
        if self.config.sample_points is not None:
            return list(self.config.sample_points)
        g = self.config.grids[0]
        step = 0.1 * (g.x_hi - g.x_lo)
        return [(0.0, self.x0 - step), (0.0, self.x0), (0.0, self.x0 + step)]

    def _dpp_delta(self) -> float:
        if self.config.dpp_delta is not None:
            return self.config.dpp_delta
        dt = self.spec.horizon / self.config.grids[0].Nt
        return max(1, int(round(0.5 * self.spec.horizon / dt))) * dt

    def _coarse_lattice(self, spec) -> Lattice:
        Nt, Nx = COARSE_GRID
        x_lo, x_hi = suggested_domain(spec)
        return build_lattice(spec, 0.0, spec.horizon, Nt, x_lo, x_hi, Nx,
                             control_count=self.config.control_grid_count)

    # ========== SUÍTES ==========

    def _suite_oracle(self) -> Tuple[Metrics, Checks]:
        spec, p = self.spec, self.spec.params
        tol = self.config.tolerance
        sol, field_ = self.solution(0), self.hjb_field(0)
        lattice_value = sol.initial_value(self.x0)
        hjb_value = field_.value_at(0.0, self.x0)
        metrics: Metrics = {'lattice_value': lattice_value, 'hjb_value': hjb_value}
        checks: Checks = {}

        window = self._interior(field_.x_grid)
        u_lattice = sol.report_slice()[:, window]
        u_hjb = field_.u[:, window]
        scale = max(float(np.max(np.abs(u_hjb))), 1e-12)
        metrics['cross_solver_gap_rel'] = float(np.max(np.abs(u_lattice - u_hjb))) / scale
        checks['cross_solver'] = metrics['cross_solver_gap_rel'] <= tol('cross_solver_rel')

        if spec.name == 'american_put':
            crr = crr_american_put(p['S0'], p['K'], p['r'], p['vol'], p['T'])
            metrics['binomial_value'] = crr
            metrics['binomial_gap_rel'] = relative_error(lattice_value, crr)
            metrics['hjb_binomial_gap_rel'] = relative_error(hjb_value, crr)
            checks['binomial'] = metrics['binomial_gap_rel'] <= tol('oracle_rel')
            if p['r'] == 0.0:
                bs = black_scholes_put(p['S0'], p['K'], p['r'], p['vol'], p['T'])
                early = field_.t_grid <= 0.5 * spec.horizon
                contact = int(np.sum(field_.active_set[early][:, window]))
                metrics['black_scholes_value'] = bs
                metrics['black_scholes_gap_rel'] = relative_error(lattice_value, bs)
                metrics['interior_contact_nodes'] = contact
                checks['black_scholes'] = metrics['black_scholes_gap_rel'] <= tol('oracle_rel')
                checks['empty_contact_set'] = contact == 0
        elif spec.name == 'controlled_drift':
            exact = controlled_drift_value(self.x0, 0.0, p['vmax'], p['T'])
            metrics['analytic_value'] = exact
            metrics['hjb_gap'] = abs(hjb_value - exact)
            metrics['lattice_gap'] = abs(lattice_value - exact)
            checks['hjb_analytic'] = metrics['hjb_gap'] <= tol('controlled_abs')
            checks['lattice_analytic'] = metrics['lattice_gap'] <= tol('controlled_abs')
            boundary = int(np.argmax(field_.control_grid[:, 0]))
            mismatch = int(np.sum(field_.argmax_control[:-1][:, window] != boundary))
            metrics['argmax_mismatch_nodes'] = mismatch
            checks['bang_bang'] = mismatch == 0
        elif spec.name == 'constant_obstacle':
            c = float(p['c'])
            metrics['lattice_gap'] = float(np.max(np.abs(sol.Y - c)))
            metrics['hjb_gap'] = float(np.max(np.abs(field_.u - c)))
            checks['constant'] = max(metrics['lattice_gap'], metrics['hjb_gap']) <= 1e-12
        elif spec.name == 'inactive_obstacle':
            exact = self.x0 + float(p['drift']) * spec.horizon
            metrics['analytic_value'] = exact
            metrics['lattice_gap'] = abs(lattice_value - exact)
            metrics['hjb_gap'] = abs(hjb_value - exact)
            checks['analytic'] = max(metrics['lattice_gap'],
                                     metrics['hjb_gap']) <= tol('controlled_abs')

        if 'K' in p and not self.controlled:
            bundle = simulate(spec, 0.0, 0.0, self.x0, MC_STEPS, MC_PATHS, self.config.seed)
            mc_value = solve_rbsde_mc(spec, bundle).initial_value()
            metrics['mc_value'] = mc_value
            metrics['mc_gap_rel'] = relative_error(mc_value, lattice_value)
            checks['monte_carlo'] = metrics['mc_gap_rel'] <= tol('mc_rel')
        return metrics, checks

    def _suite_invariants(self) -> Tuple[Metrics, Checks]:
        tol = self.config.tolerance
        sol = self.solution(0)
        skorokhod, min_dk = skorokhod_residual(sol)
        metrics: Metrics = {
            'skorokhod_sum': abs(skorokhod),
            'min_dK': min_dk,
            'k_mass': float(sol.dK.sum()),
            'min_gap_to_obstacle': float(np.min(sol.Y - sol.obstacle_S)),
        }

        # Todos os problemas embutidos (parâmetros padrão) em grade grossa
        builtin_worst, builtin_min_dk = 0.0, np.inf
        for name in list_problems():
            spec = builtin_problem(name)
            lattice = self._coarse_lattice(spec)
            s = (solve_optimal_lattice(lattice, spec) if lattice.n_controls > 1
                 else solve_reflected_lattice(lattice, spec))
            sk, dk = skorokhod_residual(s)
            builtin_worst = max(builtin_worst, abs(sk))
            builtin_min_dk = min(builtin_min_dk, dk)
        metrics['builtin_skorokhod_max'] = builtin_worst
        metrics['builtin_min_dK'] = builtin_min_dk

        # Triplas ordenadas sorteadas
        rng = np.random.default_rng(self.config.seed)
        lattice = self._coarse_lattice(self.spec)
        violation, random_worst, random_min_dk = 0.0, 0.0, np.inf
        for _ in range(RANDOM_TRIPLES):
            low, high = ordered_problems(self.spec, rng)
            sol_low, sol_high = self._solve(lattice, low), self._solve(lattice, high)
            violation = max(violation, comparison_check(sol_low, sol_high))
            for s in (sol_low, sol_high):
                sk, dk = skorokhod_residual(s)
                random_worst = max(random_worst, abs(sk))
                random_min_dk = min(random_min_dk, dk)
        metrics['comparison_violation'] = violation
        metrics['random_skorokhod_max'] = random_worst
        metrics['random_min_dK'] = random_min_dk

        skorokhod_tol = tol('skorokhod')
        checks: Checks = {
            'skorokhod': max(metrics['skorokhod_sum'], builtin_worst,
                             random_worst) <= skorokhod_tol,
            'nonnegative_dK': min(min_dk, builtin_min_dk, random_min_dk) >= 0.0,
            'above_obstacle': metrics['min_gap_to_obstacle'] >= 0.0,
            'comparison': violation <= tol('comparison'),
        }
        if self.spec.name == 'constant_obstacle':
            checks['zero_k_mass'] = abs(metrics['k_mass']) <= skorokhod_tol

        # Resíduo da HJB na janela padrão e sua redução no refinamento
        residual = residual_check(self.hjb_field(0), self.spec)
        metrics['hjb_residual'] = residual
        if len(self.config.grids) > 1:
            refined = residual_check(self.hjb_field(1), self.spec)
            shrink = residual / refined if refined > 0 else None
            metrics['hjb_residual_refined'] = refined
            metrics['hjb_residual_shrink'] = shrink
            checks['residual_shrinks'] = refined <= RESIDUAL_FLOOR or (
                shrink is not None and shrink >= tol('residual_shrink'))
        return metrics, checks

    def _suite_penalization(self) -> Tuple[Metrics, Checks]:
        penalties = list(self.config.penalty_ladder)
        lattice = self.lattice(0)
        inside = lattice.x_grid[self._interior(lattice.x_grid)]
        ladder = penalty_ladder(lattice, self.spec, penalties, self.x0,
                                optimize=self.controlled, reference=self.solution(0),
                                window=(float(inside[0]), float(inside[-1])))
        metrics: Metrics = {f'lattice_gap_n{n:g}': g for n, g in zip(penalties, ladder.gaps)}
        for n, g in zip(penalties, ladder.compact_gaps):
            metrics[f'compact_gap_n{n:g}'] = g
        reference_n = REFERENCE_PENALTY if REFERENCE_PENALTY in penalties else penalties[0]
        checks: Checks = {
            'lattice_monotone': ladder.monotone,
            'lattice_bounded': ladder.bounded,
            'lattice_gap_shrinks': ladder.gap(penalties[-1]) < ladder.gap(reference_n),
            'uniform_on_compact': ladder.uniform_on_compact,
        }

        field_ = self.hjb_field(0)
        g = self.config.grids[0]
        hjb_gaps: Dict[float, float] = {}
        monotone, bounded, previous = True, True, None
        for n in penalties:
            pen = solve_penalized_hjb(self.spec, field_.t_grid, field_.x_grid, n,
                                      substeps=self.substeps[0]['hjb'],
                                      control_count=self.config.control_grid_count)
            hjb_gaps[n] = float(np.max(np.abs(field_.u - pen.u)))
            bounded &= bool(np.all(pen.u <= field_.u + 1e-10))
            if previous is not None:
                monotone &= bool(np.all(pen.u >= previous - 1e-10))
            previous = pen.u
            metrics[f'hjb_gap_n{n:g}'] = hjb_gaps[n]
        logger.debug("✅ Escada HJB em %d×%d concluída", g.Nt, g.Nx)
        checks['hjb_monotone'] = monotone
        checks['hjb_bounded'] = bounded
        checks['hjb_gap_shrinks'] = hjb_gaps[penalties[-1]] < hjb_gaps[reference_n]
        return metrics, checks

    def _suite_dpp(self) -> Tuple[Metrics, Checks]:
        tol = self.config.tolerance
        points = self._sample_points()
        cc = self.config.control_grid_count

        # Rota do lattice: um passo de relatório, exata por construção
        lattice_field = value_field_from_lattice(self.solution(0), self.lattice(0))
        exact = dpp_check(self.spec, lattice_field, lattice_field.dt, points, cc)
        metrics: Metrics = {
            'lattice_gap': exact.max_abs_gap,
            'lattice_gap_frozen': exact.max_abs_gap_frozen,
        }
        checks: Checks = {'lattice_exact': exact.max_abs_gap <= tol('dpp_lattice')}

        # Rota cruzada: campo HJB como terminal do semigrupo
        delta = self._dpp_delta()
        cross = dpp_check(self.spec, self.hjb_field(0), delta, points, cc)
        self._dpp_report = cross
        scale = max(float(np.max(np.abs(cross.lhs))), 1e-12)
        metrics['delta'] = delta
        metrics['cross_gap'] = cross.max_abs_gap
        metrics['cross_gap_rel'] = cross.max_abs_gap / scale
        metrics['cross_gap_frozen'] = cross.max_abs_gap_frozen
        checks['cross_route'] = metrics['cross_gap_rel'] <= tol('dpp_cross_rel')

        if len(self.config.grids) > 1:
            refined = dpp_check(self.spec, self.hjb_field(1), delta, points, cc)
            metrics['cross_gap_refined'] = refined.max_abs_gap
            shrink = (cross.max_abs_gap / refined.max_abs_gap if refined.max_abs_gap > 0
                      else None)
            metrics['cross_gap_shrink'] = shrink
            checks['cross_gap_shrinks'] = shrink is None or shrink >= tol('dpp_shrink')

        # Concatenação de controles extremos sobre A = {W_{t/2} ≥ 0} e sobre A = Ω
        controls = self.spec.control_grid(cc)
        t_cut = 0.5 * self.spec.horizon
        for key, degenerate in (('partition_gap', False), ('partition_gap_degenerate', True)):
            metrics[key] = partition_concat_check(
                self.spec, t_cut, self.x0, controls[-1], controls[0], seed=self.config.seed,
                M=PARTITION_PATHS, Nt=PARTITION_STEPS, degenerate=degenerate)
        checks['partition_concat'] = metrics['partition_gap'] <= tol('partition_abs')
        checks['partition_degenerate'] = metrics['partition_gap_degenerate'] == 0.0
        return metrics, checks

    def _suite_regularity(self) -> Tuple[Metrics, Checks]:
        base = regularity_check(self.hjb_field(0))
        metrics: Metrics = dict(base.to_dict())
        checks: Checks = {}
        if 'K' in self.spec.params:
            checks['growth_bounded_by_strike'] = base.growth_ratio <= float(self.spec.params['K'])
        if len(self.config.grids) > 1:
            refined = regularity_check(self.hjb_field(1))
            factor = self.config.tolerance('regularity_factor')
            ratio = (refined.holder_t_ratio / base.holder_t_ratio if base.holder_t_ratio > 0
                     else None)
            metrics['holder_t_ratio_refined'] = refined.holder_t_ratio
            metrics['holder_stability'] = ratio
            checks['holder_stable'] = ratio is None or 1.0 / factor <= ratio <= factor
        return metrics, checks

    def _suite_bruteforce(self) -> Tuple[Metrics, Checks]:
        worst = 0.0
        for k in range(TREE_COUNT):
            spec, lattice, j0 = tabulated_tree(seed=self.config.seed + k)
            enumerated = mixed_bruteforce(lattice, spec, j0)
            value = float(solve_optimal_lattice(lattice, spec).Y[0, j0])
            worst = max(worst, abs(enumerated - value))
        metrics: Metrics = {'trees': TREE_COUNT, 'max_gap': worst}
        return metrics, {'enumeration_matches': worst <= self.config.tolerance('bruteforce')}

    def _suite_stability(self) -> Tuple[Metrics, Checks]:
        tol = self.config.tolerance
        lattice, base = self.lattice(0), self.solution(0)
        j0 = self._start_node(lattice)
        metrics: Metrics = {}
        checks: Checks = {}

        # Deslocamento do obstáculo: inclinação log-log de sup|ΔY| contra ε
        shifts = []
        for eps in OBSTACLE_SHIFTS:
            pert = self._solve(lattice, perturbed_problem(self.spec, 'obstacle', eps))
            shifts.append(sup_gap(base, pert))
            metrics[f'obstacle_shift_{eps:g}'] = shifts[-1]
        if min(shifts) > 0:
            slope = float(np.polyfit(np.log(OBSTACLE_SHIFTS), np.log(shifts), 1)[0])
            metrics['obstacle_shift_slope'] = slope
            checks['obstacle_rate'] = slope >= tol('stability_slope')
        else:
            metrics['obstacle_shift_slope'] = None

        pert = self._solve(lattice, perturbed_problem(self.spec, 'obstacle', OBSTACLE_SHIFTS[0]))
        lhs, rhs = stability_sides(base, pert, self.spec, lattice, 'obstacle',
                                   OBSTACLE_SHIFTS[0], j0=j0, paths=ESTIMATE_PATHS,
                                   seed=self.config.seed)
        metrics['stability_ratio'] = lhs / rhs if rhs > 0 else None

        # Deslocamento terminal com barreira inativa e g = 0: sup|ΔY| = ε
        flat = builtin_problem('inactive_obstacle')
        flat_lattice = self._coarse_lattice(flat)
        flat_gap = sup_gap(solve_reflected_lattice(flat_lattice, flat),
                           solve_reflected_lattice(
                               flat_lattice, perturbed_problem(flat, 'terminal', TERMINAL_SHIFT)))
        metrics['terminal_shift_error'] = abs(flat_gap - TERMINAL_SHIFT)
        checks['terminal_shift_exact'] = metrics['terminal_shift_error'] <= 1e-12

        # Estimativa a priori: C ajustado em λ = 1, verificado para cada λ
        lhs1, rhs1 = apriori_sides(base, self.spec, lattice, j0=j0, paths=ESTIMATE_PATHS,
                                   seed=self.config.seed)
        C = fitted_constant(lhs1, rhs1)
        metrics['apriori_constant'] = C
        margin = tol('apriori_margin')
        for lam in DATA_SCALINGS:
            scaled = scaled_problem(self.spec, lam)
            sol = self._solve(lattice, scaled)
            lhs, rhs = apriori_sides(sol, scaled, lattice, j0=j0, paths=ESTIMATE_PATHS,
                                     seed=self.config.seed)
            metrics[f'apriori_ratio_{lam:g}'] = lhs / rhs
            checks[f'apriori_{lam:g}'] = lhs <= C * rhs * (1.0 + margin)

        # Estabilidade conjunta em (ζ, v): C ajustado em |ζ - ζ'| = 1
        controls = self.spec.control_grid(self.config.control_grid_count)
        joint = {}
        for dist in JOINT_DISTANCES:
            joint[dist] = joint_stability_sides(
                self.spec, self.x0, self.x0 + dist, controls[-1], controls[-1],
                Nt=MC_STEPS, paths=ESTIMATE_PATHS, seed=self.config.seed)
            metrics[f'joint_ratio_{dist:g}'] = joint[dist][0] / joint[dist][1]
        C_joint = fitted_constant(*joint[JOINT_DISTANCES[0]])
        metrics['joint_constant'] = C_joint
        checks['joint_stability'] = all(
            lhs <= C_joint * rhs * (1.0 + tol('joint_margin')) for lhs, rhs in joint.values())
        if len(controls) > 1:
            lhs, rhs = joint_stability_sides(
                self.spec, self.x0, self.x0, controls[-1], controls[0],
                Nt=MC_STEPS, paths=ESTIMATE_PATHS, seed=self.config.seed)
            metrics['joint_control_ratio'] = lhs / rhs
        return metrics, checks


def run(config: RunConfig, normalize_timestamps: bool = False) -> ExperimentReport:
    """Executa as suítes de `config` e grava o relatório em output_dir."""
    return ExperimentRunner(config, normalize_timestamps).run()


# ========== COMPARAÇÃO DE RELATÓRIOS ==========

def _fmt(value) -> str:
    return "None" if value is None else f"{value:.6g}"


def report_diff(a: ExperimentReport, b: ExperimentReport) -> str:
    """
    Comparação lado a lado das métricas que diferem entre dois relatórios.

    Returns:
        Texto com uma linha por métrica alterada (vazio se idênticos)

    Raises:
        KeyMismatch: conjuntos de suítes diferentes
    """
    names_a = [s.name for s in a.suites]
    names_b = [s.name for s in b.suites]
    if sorted(names_a) != sorted(names_b):
        raise KeyMismatch(f"Suítes diferentes: {names_a} e {names_b}")

    lines = []
    for name in names_a:
        sa, sb = a.suite(name), b.suite(name)
        for key in sorted(set(sa.metrics) | set(sb.metrics)):
            va, vb = sa.metrics.get(key), sb.metrics.get(key)
            if va == vb:
                continue
            delta = f" (Δ {vb - va:+.3g})" if va is not None and vb is not None else ""
            lines.append(f"{name}.{key}: {_fmt(va)} -> {_fmt(vb)}{delta}")
        if sa.passed != sb.passed:
            lines.append(f"{name}.passed: {sa.passed} -> {sb.passed}")
    return "\n".join(lines)
