"""Outcome assertions for heap programs: semantics, entailment, bi-abduction and symbolic execution."""

__version__ = "0.1.0"
