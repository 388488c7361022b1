"""Sparse-hypercolumn binary segmentation toolkit.

Multi-scale per-pixel feature assembly, class-stratified subsampling,
from-scratch base classifiers and ensembles, streaming full-image pixel
classification, segmentation metrics and paired statistical testing.
"""

from .hcf import Sample, read_container, read_container_file, validate_sample, write_container, write_container_file
from .hypercolumn import (HypercolumnConfig, LabeledPixels,
                          build_dense_hypercolumn, concat_hypercolumns,
                          stratified_subsample)
from .metrics import (ConfusionCounts, MetricVector, RunSummary,
                      aggregate_runs, confusion_counts, segmentation_metrics)
from .stats import DegenerateSampleError, relative_gain, wilcoxon_signed_rank
from .tensor import bilinear_upsample, concat_channels, flatten_pixels

__version__ = "0.1.0"

__all__ = [
    "Sample", "read_container", "read_container_file", "write_container",
    "write_container_file", "validate_sample",
    "HypercolumnConfig", "LabeledPixels", "build_dense_hypercolumn",
    "concat_hypercolumns", "stratified_subsample",
    "ConfusionCounts", "MetricVector", "RunSummary", "aggregate_runs",
    "confusion_counts", "segmentation_metrics",
    "DegenerateSampleError", "relative_gain", "wilcoxon_signed_rank",
    "bilinear_upsample", "concat_channels", "flatten_pixels",
    "__version__",
]
