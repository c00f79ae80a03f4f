# -*- coding: utf-8 -*-
"""
Validadores - Sondagem das hipóteses do problema e pré-checagem de grades.

Funcionalidades:
- validate_spec: quocientes de Lipschitz amostrados de b, σ, g, Φ, h
- Consistência terminal Φ(x) ≥ h(T, x)
- Razões CFL dos esquemas explícitos e número de subpassos necessário
"""

from typing import Dict, List, Optional, Tuple
import logging
import math

import numpy as np

from src.models.problem import AssumptionReport, Box, ProblemSpec
from src.utils.exceptions import CFLViolation, DegenerateDomain, NonFiniteCoefficient

logger = logging.getLogger(__name__)

PROBE_HALF_WIDTH = 10.0
SAMPLE_HALF_WIDTH = 10.0

# Limites CFL de cada esquema explícito
LATTICE_CFL_LIMIT = 1.0
HJB_CFL_LIMIT = 0.5
CFL_SLACK = 1e-12


# ========== HIPÓTESES DE LIPSCHITZ ==========

def _sample_control(spec: ProblemSpec, rng: np.random.Generator) -> np.ndarray:
    cs = spec.control_set
    if isinstance(cs, Box):
        return rng.uniform(np.asarray(cs.lower), np.asarray(cs.upper))
    points = cs.grid()
    return points[rng.integers(len(points))]


def _finite(name: str, value: np.ndarray, probe: Tuple[float, ...]) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise NonFiniteCoefficient(name, probe)
    return value


def validate_spec(spec: ProblemSpec, probes: int = 1000, seed: int = 0,
                  half_width: float = PROBE_HALF_WIDTH,
                  tolerance: float = 1e-6) -> AssumptionReport:
    """
    Sonda as hipóteses de Lipschitz por amostragem.

    Sorteia `probes` pares (t, x, x', v, v', y, y', z, z') na caixa
    [0, T] × [-half_width, half_width]ⁿ × U e registra o maior quociente
    de diferenças de cada coeficiente. Também verifica Φ(x) ≥ h(T, x).

    Args:
        spec: Problema a verificar
        probes: Número de pares sorteados (≥ 1)
        seed: Semente; o resultado é determinístico para a mesma semente
        half_width: Meia-largura da caixa de estados
        tolerance: Folga relativa sobre L

    Returns:
        AssumptionReport

    Raises:
        NonFiniteCoefficient: algum coeficiente retornou NaN/∞
    """
    if probes < 1:
        raise ValueError(f"probes deve ser ≥ 1, recebido {probes}")

    rng = np.random.default_rng(seed)
    n, d = spec.state_dim, spec.brownian_dim
    T = spec.horizon
    limit = spec.lipschitz_L * (1.0 + tolerance)

    quotients: Dict[str, float] = {
        'drift': 0.0, 'diffusion': 0.0, 'driver': 0.0, 'terminal': 0.0, 'obstacle': 0.0,
    }
    violations: List[Tuple[str, float, Tuple[float, ...], Tuple[float, ...]]] = []
    terminal_violations: List[Tuple[float, ...]] = []

    def record(name: str, q: float, t: float, x: np.ndarray, v: np.ndarray):
        if q > quotients[name]:
            quotients[name] = q
        if q > limit:
            violations.append((name, q, (t, *x.tolist()), tuple(v.tolist())))

    for _ in range(probes):
        t = float(rng.uniform(0.0, T))
        x = rng.uniform(-half_width, half_width, size=n)
        x2 = rng.uniform(-half_width, half_width, size=n)
        v = np.atleast_1d(_sample_control(spec, rng)).astype(float)
        v2 = np.atleast_1d(_sample_control(spec, rng)).astype(float)
        y, y2 = rng.uniform(-SAMPLE_HALF_WIDTH, SAMPLE_HALF_WIDTH, size=2)
        z = rng.uniform(-SAMPLE_HALF_WIDTH, SAMPLE_HALF_WIDTH, size=d)
        z2 = rng.uniform(-SAMPLE_HALF_WIDTH, SAMPLE_HALF_WIDTH, size=d)
        probe = (t, *x.tolist())

        dx = float(np.linalg.norm(x - x2))
        dv = float(np.linalg.norm(v - v2))
        dy = abs(float(y - y2))
        dz = float(np.linalg.norm(z - z2))

        X = np.stack([x, x2])
        V = np.stack([v, v2])

        b = _finite('drift', spec.drift(t, X, V), probe)
        b = np.broadcast_to(b, (2, n))
        s = _finite('diffusion', spec.diffusion(t, X, V), probe)
        s = np.broadcast_to(s, (2, n, d))
        g = _finite('driver', spec.driver(t, X, np.array([y, y2]), np.stack([z, z2]), V), probe)
        g = np.broadcast_to(g, (2,))
        phi = np.broadcast_to(_finite('terminal', spec.terminal(X), probe), (2,))
        h = np.broadcast_to(_finite('obstacle', spec.obstacle(t, X), probe), (2,))
        h_T = np.broadcast_to(_finite('obstacle', spec.obstacle(T, X), probe), (2,))

        if dx + dv > 0:
            record('drift', float(np.linalg.norm(b[0] - b[1])) / (dx + dv), t, x, v)
            record('diffusion', float(np.linalg.norm(s[0] - s[1])) / (dx + dv), t, x, v)
        if dx + dv + dy + dz > 0:
            record('driver', abs(float(g[0] - g[1])) / (dx + dv + dy + dz), t, x, v)
        if dx > 0:
            record('terminal', abs(float(phi[0] - phi[1])) / dx, t, x, v)
            record('obstacle', abs(float(h[0] - h[1])) / dx, t, x, v)

        for k in range(2):
            if phi[k] < h_T[k]:
                terminal_violations.append(tuple(X[k].tolist()))

    report = AssumptionReport(
        lipschitz_L=spec.lipschitz_L,
        max_observed_lipschitz=quotients,
        violation_points=violations,
        terminal_violations=terminal_violations,
        tolerance=tolerance,
        probes=probes,
        seed=seed,
    )
    status = "✅" if report.passed else "⚠️"
    logger.info("%s Hipóteses de %s: %s", status, spec.name, quotients)
    return report


# ========== CFL ==========

def cfl_ratio(spec: ProblemSpec, times: np.ndarray, x_grid: np.ndarray, dt: float,
              controls: np.ndarray, scheme: str = 'lattice') -> Tuple[float, int, int]:
    """
    Maior razão CFL sobre tempos, nós e controles.

    lattice: σ²Δt/Δx² + |b|Δt/Δx        (limite 1)
    hjb:     σ²Δt/Δx² + |b|Δt/(2Δx)     (limite 1/2)

    Returns:
        (razão máxima, nó, índice de controle) do pior caso
    """
    dx = float(x_grid[1] - x_grid[0])
    drift_den = dx if scheme == 'lattice' else 2.0 * dx
    worst = (0.0, 0, 0)
    for t in times:
        for m, v in enumerate(controls):
            b = spec.drift_1d(float(t), x_grid, v)
            s2 = np.sum(spec.diffusion_1d(float(t), x_grid, v) ** 2, axis=1)
            ratio = s2 * dt / dx ** 2 + np.abs(b) * dt / drift_den
            j = int(np.argmax(ratio))
            if ratio[j] > worst[0]:
                worst = (float(ratio[j]), j, m)
    return worst


def required_substeps(spec: ProblemSpec, t0: float, t1: float, Nt: int,
                      x_lo: float, x_hi: float, Nx: int,
                      scheme: str = 'lattice', control_count: Optional[int] = None,
                      max_substeps: int = 100000) -> int:
    """
    Menor número de subpassos explícitos por passo de relatório que
    satisfaz a CFL do esquema.

    Raises:
        DegenerateDomain: x_hi ≤ x_lo ou Nt < 1
        CFLViolation: nem `max_substeps` subpassos bastam
    """
    if not x_hi > x_lo or Nx < 1:
        raise DegenerateDomain(f"Domínio degenerado: [{x_lo}, {x_hi}], Nx={Nx}")
    if Nt < 1 or not t1 > t0:
        raise DegenerateDomain(f"Janela de tempo degenerada: [{t0}, {t1}], Nt={Nt}")
    limit = LATTICE_CFL_LIMIT if scheme == 'lattice' else HJB_CFL_LIMIT
    x_grid = np.linspace(x_lo, x_hi, Nx + 1)
    controls = spec.control_grid(control_count)
    dt = (t1 - t0) / Nt
    coarse = np.linspace(t0, t1, Nt + 1)[:-1]
    ratio, node, control = cfl_ratio(spec, coarse, x_grid, dt, controls, scheme)
    substeps = max(1, math.ceil(ratio / limit * (1.0 - CFL_SLACK)))

    # Coeficientes dependentes do tempo: confere nos instantes finos.
    while substeps <= max_substeps:
        fine = np.linspace(t0, t1, Nt * substeps + 1)[:-1]
        fine_ratio, node, control = cfl_ratio(spec, fine, x_grid, dt / substeps,
                                              controls, scheme)
        if fine_ratio <= limit * (1.0 + CFL_SLACK):
            logger.debug("🔄 %s: %d subpassos (%s)", spec.name, substeps, scheme)
            return substeps
        substeps = max(substeps + 1, math.ceil(substeps * fine_ratio / limit))
    raise CFLViolation(node, control, ratio / max_substeps, limit)
