"""Finite-stage construction of a foliation of the unit ball by holomorphic discs.

Modules follow the pipeline order: ``geometry`` and ``automorphisms`` (points,
regions, shear chains), ``labyrinth`` (plates in spherical shells and certified
path-length increments), ``mover`` (polynomial shear synthesis), ``induction``
(the staged automorphisms and their ledger), ``leaves`` (leaf tracing and
completeness evidence) and ``pipeline``/``cli`` (artifacts).
"""
from .automorphisms import AutChain, ElementaryAut, affine, compose, identity_chain, overshear, shear
from .config import RunConfig, load_config
from .geometry import CPoint
from .induction import InductionConfig, InductionState, convergence_report, run, step
from .labyrinth import Labyrinth, Plate, build_labyrinth, build_shells, estimate_min_avoiding_length
from .leaves import completeness_evidence, foliation_partition_check, leaf_clearance, trace_leaf
from .mover import MoveSpec, MoverConfig, lemma_main, lemma_starshaped
from .pipeline import emit_plot_data, run_pipeline

__version__ = "0.1.0"
