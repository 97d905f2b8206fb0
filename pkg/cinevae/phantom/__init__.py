"""Synthetic phantom cohorts, normalisation, augmentation and dataset files."""

from .augment import augment, augment_labels, sample_transform, transform_frame
from .cohort import (
    CohortDraw,
    ResponseModel,
    calibrate_response,
    generate_cohort,
    generate_pretrain_pool,
    generate_pretrain_subjects,
    generate_subject,
    sample_cohort,
    subject_seeds,
)
from .dataset_io import load_dataset, save_dataset, sidecar_path
from .geometry import (
    PhantomGeometry,
    contraction_profile,
    geometry_from_factors,
    render_frame,
    render_sequence,
    septal_flash_bump,
)
from .measure import septal_boundary_column, septal_displacement
from .resample import spatial_resample, temporal_resample

__all__ = [
    "augment",
    "augment_labels",
    "sample_transform",
    "transform_frame",
    "CohortDraw",
    "ResponseModel",
    "calibrate_response",
    "generate_cohort",
    "generate_pretrain_pool",
    "generate_pretrain_subjects",
    "generate_subject",
    "sample_cohort",
    "subject_seeds",
    "load_dataset",
    "save_dataset",
    "sidecar_path",
    "PhantomGeometry",
    "contraction_profile",
    "geometry_from_factors",
    "render_frame",
    "render_sequence",
    "septal_flash_bump",
    "septal_boundary_column",
    "septal_displacement",
    "temporal_resample",
    "spatial_resample",
]
