"""Popular-path queries over historical trajectories.

A SEARCH stage reads routes straight out of the trajectory log; when none
exist a GENERATE stage stitches candidates from popular segments. Agents can
be exact (``OracleBackend``) or any chat-completion endpoint.
"""
from .errors import PopPathError
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import MetricReport, aggregate, evaluate, f1_score, traversability
from .oracle import (
    EdgeRanking,
    PoiRanking,
    discover_paths,
    k_shortest_paths,
    rank_edges,
    rank_pois,
    select_path,
    synthesize_paths,
)
from .orchestrator import GENERATE, SEARCH, OracleBackend, Pipeline, QueryResult, run_batch, run_query
from .trajectory import (
    CandidateSet,
    Query,
    TrajectoryDataset,
    TrajectoryGraph,
    build_graph,
    canonical_popular_path,
    extract_ground_truth,
    ground_truth_route,
    load_dataset,
    parse_dataset,
)

__version__ = "0.1.0"
