# -*- coding: utf-8 -*-
"""
Pacote src - Solver de controle ótimo recursivo com obstáculo
"""

__version__ = "1.0.0"
