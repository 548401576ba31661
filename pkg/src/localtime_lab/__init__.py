"""Simulation and estimation of local times of continuous semimartingales."""
from .convexcalc import ConvexCombo, eval_f, eval_left_derivative, ito_tanaka_residual
from .localtime import (BandConfig, LocalTimeField, band_local_time, local_time_field,
                        tanaka_local_time, tanaka_positive_part)
from .occupation import IntervalUnion, OccupationWeight, occupation_histogram, occupation_time
from .paths import (ItoCoefficients, SamplePath, SimulationConfig, TimeGrid, simulate_ito,
                    simulate_wiener)
from .reflection import ReflectedPair, simulate_regulated_sde, skorohod_map, verify_skorohod
from .timechange import ClockDensity, TimeChangeMap, apply_time_change, build_time_change

__version__ = "0.1.0"

__all__ = [
    "BandConfig",
    "ClockDensity",
    "ConvexCombo",
    "IntervalUnion",
    "ItoCoefficients",
    "LocalTimeField",
    "OccupationWeight",
    "ReflectedPair",
    "SamplePath",
    "SimulationConfig",
    "TimeChangeMap",
    "TimeGrid",
    "apply_time_change",
    "band_local_time",
    "build_time_change",
    "eval_f",
    "eval_left_derivative",
    "ito_tanaka_residual",
    "local_time_field",
    "occupation_histogram",
    "occupation_time",
    "simulate_ito",
    "simulate_regulated_sde",
    "simulate_wiener",
    "skorohod_map",
    "tanaka_local_time",
    "tanaka_positive_part",
    "verify_skorohod",
]
