"""Morphometry, perturbation and statistical comparison of rasterised glyphs."""

from . import errors
from .idx import (
    ImageDataset,
    LabelVector,
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)
from .measure import (
    ATTRIBUTE_NAMES,
    MorphometryRecord,
    PipelineProducts,
    bounding_parallelogram,
    measure,
    run_pipeline,
    slant,
    stroke_length,
    stroke_thickness,
)
from .perturb import (
    BUILTIN_SPECS,
    PerturbOutcome,
    PerturbSpec,
    build_mixed_dataset,
    fracture,
    perturb_image,
    swell,
    thicken,
    thin,
)
from .raster import (
    Skeleton,
    binarize,
    bicubic_sample,
    dilate_disc,
    downscale,
    edt,
    erode_disc,
    skeletonize,
    smooth,
    upscale,
    warp_backward,
)
from .stats import (
    AttributeTable,
    CodeTable,
    MIGReport,
    MMDTestResult,
    PartialCorrTable,
    dummy_expand,
    mig,
    mmd_linear_test,
    partial_correlations,
    scott_bandwidths,
)

__version__ = "0.1.0"

__all__ = [
    "ATTRIBUTE_NAMES",
    "AttributeTable",
    "BUILTIN_SPECS",
    "CodeTable",
    "ImageDataset",
    "LabelVector",
    "MIGReport",
    "MMDTestResult",
    "MorphometryRecord",
    "PartialCorrTable",
    "PerturbOutcome",
    "PerturbSpec",
    "PipelineProducts",
    "Skeleton",
    "binarize",
    "bicubic_sample",
    "bounding_parallelogram",
    "build_mixed_dataset",
    "dilate_disc",
    "downscale",
    "dummy_expand",
    "edt",
    "erode_disc",
    "errors",
    "fracture",
    "measure",
    "mig",
    "mmd_linear_test",
    "partial_correlations",
    "perturb_image",
    "read_idx_images",
    "read_idx_labels",
    "run_pipeline",
    "scott_bandwidths",
    "skeletonize",
    "slant",
    "smooth",
    "stroke_length",
    "stroke_thickness",
    "swell",
    "thicken",
    "thin",
    "upscale",
    "warp_backward",
    "write_idx_images",
    "write_idx_labels",
]
