"""Hierarchy-aware cross-entropy: prediction aggregation plus ancestral label smoothing."""

from .losses import aggregate, hace_loss, hxe_loss, sce_loss, softmax
from .targets import TargetMatrix, TargetScheme, build_target_matrix
from .taxonomy import Taxonomy, TaxonomyError, load_taxonomy, parse_taxonomy, reachability

__all__ = [
    "Taxonomy",
    "TaxonomyError",
    "TargetMatrix",
    "TargetScheme",
    "aggregate",
    "build_target_matrix",
    "hace_loss",
    "hxe_loss",
    "load_taxonomy",
    "parse_taxonomy",
    "reachability",
    "sce_loss",
    "softmax",
]
