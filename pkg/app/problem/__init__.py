from .coarse import CoarseOperator, aggregation_matrix, build_coarse
from .decomposition import Decomposition, HaloLists, build_decomposition, slab_bounds, verify_partition_of_unity
from .grid import GridSpec, assemble_poisson, parse_triple
from .problem_set import ProblemSet, build_problem_set, weak_scaled_grid
from .subdomain import SubdomainProblem, extract_subdomain

__all__ = [
    "CoarseOperator",
    "Decomposition",
    "GridSpec",
    "HaloLists",
    "ProblemSet",
    "SubdomainProblem",
    "aggregation_matrix",
    "assemble_poisson",
    "build_coarse",
    "build_decomposition",
    "build_problem_set",
    "extract_subdomain",
    "parse_triple",
    "slab_bounds",
    "verify_partition_of_unity",
    "weak_scaled_grid",
]
