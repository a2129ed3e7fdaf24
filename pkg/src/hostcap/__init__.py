"""Risk-based PV hosting capacity analysis for radial MV feeders.

Generates conditioned load/irradiance scenarios, runs Monte Carlo
time-series power flow over an energy-growth x PV-growth planning grid,
and reduces the voltage trajectories to intensity/duration/frequency risk
metrics, operating regions, and hosting-capacity surfaces.
"""

from .clustering import (
    AverageLinkageClustering,
    ClusterAssignment,
    DiagonalGaussianMixture,
    ProfileKMeans,
    ValidityScores,
    representative_profiles,
    sweep_select,
    validity_indices,
)
from .flow import ConditionalCouplingFlow, TrainConfig, load_flow
from .irradiance import IrradianceLibrary, bootstrap_days, pv_power, segment_daily
from .pipeline import Pipeline, PipelineConfig, run_pipeline
from .powerflow import FeederNetwork, VoltageResult, simulate_scenarios, solve_snapshot, validate_network
from .profiles import LoadProfileSet, annual_energy_of, reactive_from_active, read_profiles_csv
from .reports import generate_report
from .riskmetrics import (
    DurationGrid,
    HcResult,
    RiskSurface,
    VoltageLimits,
    classify_region,
    frequency,
    hosting_capacity_from_curve,
    intensity,
    representative_duration,
    sustained_overvoltage,
    sustained_stats,
    sustained_undervoltage,
)
from .rng import RngStream
from .scenario import GrowthSchedule, NodalInjection, ScenarioSet, build_scenario_set, growth_level
from .stats import percentile

__version__ = "0.1.0"
