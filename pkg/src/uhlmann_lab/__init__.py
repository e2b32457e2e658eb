"""uhlmann_lab: a desk-scale numerical laboratory for Uhlmann transformations
and the protocols, cryptography, Shannon-theoretic and physics constructions
built on them."""

from .rng import Seed, child_seed, generator

__version__ = "0.1.0"

__all__ = ["Seed", "child_seed", "generator", "__version__"]
