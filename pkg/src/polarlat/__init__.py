"""Multilevel polarization of erasure-type side information over cyclic subgroup lattices.

Modules
-------
lattice     finite distributive lattices of subgroups (divisor and chain lattices)
cosets      coset arithmetic inside Z/L
vectors     probability vectors over lattice elements and their transforms
engine      recursive butterfly over many indices, classification, empirical levels
solver      exact limiting level distribution
montecarlo  sample-level simulation of the coset recursion
cli         command-line interface
"""
from .engine import SourceSpec, classify, empirical_mu, entropies, evolve
from .lattice import chain_lattice, divisor_lattice, explicit_lattice, verify_laws
from .solver import prufer_mu, solve_mu
from .vectors import EpsVector, entropy, minus_transform, plus_transform, quotient_entropy

__version__ = "0.1.0"

__all__ = [
    "SourceSpec", "classify", "empirical_mu", "entropies", "evolve",
    "chain_lattice", "divisor_lattice", "explicit_lattice", "verify_laws",
    "prufer_mu", "solve_mu",
    "EpsVector", "entropy", "minus_transform", "plus_transform", "quotient_entropy",
]
