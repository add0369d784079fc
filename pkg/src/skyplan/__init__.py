"""skyplan: power-minimal UAV base-station deployment planning.

Pipeline pieces: day-ahead traffic prediction (``predictor``), station
clustering into aerial cells (``clustering``), per-cell UAV placement
and power (``placement``), uplink channel model (``channel``),
multi-access power allocation (``access``), and file I/O plus
synthetic scenarios (``data``).  ``cli`` ties them together.
"""

from .access import (AccessSolution, Scheme, UserDemand, compare_schemes,
                     solve_fdma, solve_rsma, solve_tdma)
from .channel import Point3, RadioParams, link_gain, min_power_for_rate
from .clustering import GmmModel, KegResult, KmeansResult, assign_labels, em_fit, keg, kmeans
from .data import (BaseStation, Bounds, TrafficMatrix, filter_area,
                   load_topology, load_traffic, project_to_meters, synth_scenario)
from .errors import InputError, SkyplanError, ValidationError
from .placement import (AerialCell, CellStation, DeploymentPlan, cell_power,
                        optimal_position, plan_deployment, traffic_weight)
from .predictor import Mlp, Normalizer, TrainConfig, backprop_step, fit_normalizer, predict_next_day, train

__version__ = "0.1.0"

__all__ = [
    "AccessSolution", "AerialCell", "BaseStation", "Bounds", "CellStation",
    "DeploymentPlan", "GmmModel", "InputError", "KegResult", "KmeansResult",
    "Mlp", "Normalizer", "Point3", "RadioParams", "Scheme", "SkyplanError",
    "TrafficMatrix", "TrainConfig", "UserDemand", "ValidationError",
    "assign_labels", "backprop_step", "cell_power", "compare_schemes",
    "em_fit", "filter_area", "fit_normalizer", "keg", "kmeans", "link_gain",
    "load_topology", "load_traffic", "min_power_for_rate", "optimal_position",
    "plan_deployment", "predict_next_day", "project_to_meters", "solve_fdma",
    "solve_rsma", "solve_tdma", "synth_scenario", "traffic_weight", "train",
    "__version__",
]
