"""Cycle-level circuits, leakage contracts and relational invariant learning.

Subpackages: :mod:`uvleak.engine` (verification and oracles) and
:mod:`uvleak.logic` (formulas, bit-blasting, SAT, validity checking).
"""

__version__ = "0.1.0"
