from .estimators import AverageLinkageClustering, DiagonalGaussianMixture, ProfileKMeans
from .indices import ValidityScores, validity_indices
from .sweep import (
    ClusterAssignment,
    RepresentativeProfiles,
    SweepResult,
    relabel_by_mean_power,
    representative_profiles,
    sweep_select,
)

__all__ = [
    "AverageLinkageClustering",
    "ClusterAssignment",
    "DiagonalGaussianMixture",
    "ProfileKMeans",
    "RepresentativeProfiles",
    "SweepResult",
    "ValidityScores",
    "relabel_by_mean_power",
    "representative_profiles",
    "sweep_select",
    "validity_indices",
]
