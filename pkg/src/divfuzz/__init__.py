"""Behavior-diversity-guided fuzzing of driving scenarios in a small deterministic 2D simulator."""

from .behavior import abstract, fit_clusters, merge_states, trace_distance
from .controller import ReferenceController
from .fuzzer import CampaignConfig, CampaignResult, replay, run_campaign
from .oracle import VerdictReport, evaluate
from .roadmap import load_map
from .scenario import Scenario, load_scenario, shipped_seeds
from .simulator import simulate

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig", "CampaignResult", "ReferenceController", "Scenario", "VerdictReport",
    "abstract", "evaluate", "fit_clusters", "load_map", "load_scenario", "merge_states",
    "replay", "run_campaign", "shipped_seeds", "simulate", "trace_distance",
]
