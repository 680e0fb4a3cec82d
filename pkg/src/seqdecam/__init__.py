"""Toolkit for recovering the identities of camouflaged gates in sequential
circuits from black-box input/output access only (no scan chains)."""

from .netlist import (
    BitSeq,
    CamoCircuit,
    Circuit,
    Completion,
    camouflage,
    parse_bench,
    run_sequence,
    serialize_bench,
    step,
)
from .oracle import BlackBox, QuerySet, record
from .attack import AttackConfig, AttackReport, product_equiv, run_attack

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackReport",
    "BitSeq",
    "BlackBox",
    "CamoCircuit",
    "Circuit",
    "Completion",
    "QuerySet",
    "camouflage",
    "parse_bench",
    "product_equiv",
    "record",
    "run_attack",
    "run_sequence",
    "serialize_bench",
    "step",
]
