"""Transmission expansion planning with path-based angular cuts."""
from .backbone import (DirectedPath, FlowOverlay, ParallelFamily, enumerate_paths,
                       extract_flow_directions, group_parallel, intersect_overlays,
                       layered_overlay)
from .bnb import BnbConfig, BnbResult, CutPool, solve_milp
from .cuts import (PathVi, cr_product, generate_cut_pool, lemma1_cut, lemma2_cuts,
                   theorem1_cut, theorem2_cut)
from .fixtures import load_fixture
from .instance import TepInstance, load_instance, parse_instance, serialize_instance
from .lp import check_point_feasible, solve_lp
from .model import (add_symmetry_breaking, build_full_model, build_relaxation, compute_big_m,
                    export_model_text)
from .oracle import enumerate_feasible, lr_objective_delta, verify_cut_validity, verify_cuts

__version__ = "0.1.0"

__all__ = [
    "DirectedPath", "FlowOverlay", "ParallelFamily", "enumerate_paths", "extract_flow_directions",
    "group_parallel", "intersect_overlays", "layered_overlay",
    "BnbConfig", "BnbResult", "CutPool", "solve_milp",
    "PathVi", "cr_product", "generate_cut_pool", "lemma1_cut", "lemma2_cuts", "theorem1_cut",
    "theorem2_cut",
    "load_fixture",
    "TepInstance", "load_instance", "parse_instance", "serialize_instance",
    "check_point_feasible", "solve_lp",
    "add_symmetry_breaking", "build_full_model", "build_relaxation", "compute_big_m",
    "export_model_text",
    "enumerate_feasible", "lr_objective_delta", "verify_cut_validity", "verify_cuts",
]
