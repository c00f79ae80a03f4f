# -*- coding: utf-8 -*-
"""
Construtores compartilhados pelos testes: problemas, lattices pequenos e
documentos de configuração.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.processing.hjb import solve_hjb_fd
from src.processing.lattice import build_lattice
from src.processing.problems import builtin_problem, suggested_domain

PUT_DOMAIN = (20.0, 300.0)


def small_lattice(name: str, Nt: int = 10, Nx: int = 40, params: Optional[Dict] = None,
                  control_count: Optional[int] = None):
    """(problema, lattice) no domínio sugerido com subpassos automáticos."""
    spec = builtin_problem(name, params)
    x_lo, x_hi = suggested_domain(spec)
    lattice = build_lattice(spec, 0.0, spec.horizon, Nt, x_lo, x_hi, Nx,
                            control_count=control_count)
    return spec, lattice


def small_field(name: str, Nt: int = 10, Nx: int = 40, params: Optional[Dict] = None,
                control_count: Optional[int] = None):
    """(problema, campo HJB) no domínio sugerido."""
    spec = builtin_problem(name, params)
    x_lo, x_hi = suggested_domain(spec)
    field = solve_hjb_fd(spec, np.linspace(0.0, spec.horizon, Nt + 1),
                         np.linspace(x_lo, x_hi, Nx + 1), control_count=control_count)
    return spec, field


def config_document(output_dir: Path, **overrides: Any) -> Dict[str, Any]:
    """Documento mínimo válido (constant_obstacle, grade pequena)."""
    doc: Dict[str, Any] = {
        "problem": {"name": "constant_obstacle", "params": {"c": 0.0}},
        "grids": [{"Nt": 10, "Nx": 20, "x_lo": -6.0, "x_hi": 6.0}],
        "suites": ["invariants"],
        "seed": 0,
        "output_dir": str(output_dir),
    }
    doc.update(overrides)
    return doc


def write_config(path: Path, doc: Dict[str, Any]) -> str:
    path.write_text(json.dumps(doc, indent=2), encoding='utf-8')
    return str(path)
