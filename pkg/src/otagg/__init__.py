"""Transport-based local-feature aggregation into global descriptors.

The package turns pre-extracted image feature maps into compact unit-norm
descriptors via an entropic transport assignment of tokens to clusters,
optionally biased by learned spatial preferences, and evaluates retrieval
quality with exact L2 search and Recall@K.
"""

from .aggregator import FeatureMap, PipelineConfig, run_pipeline
from .errors import (ConfigError, DegenerateError, DimensionError, FormatError,
                     OtaggError)
from .ot_core import (LogMarginals, MarginalResiduals, SolverConfig,
                      asymmetric_transport, marginal_residuals, sinkhorn_baseline)
from .retrieval import DescriptorIndex, RecallReport, build_index, recall_at_k, search
from .synth import SynthSpec, gen_dataset, gen_params
from .tensor_io import (DescriptorRecord, GroundTruth, read_descriptor_db,
                        read_ground_truth, read_params, read_tensor,
                        write_descriptor_db, write_ground_truth, write_params,
                        write_tensor)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateError",
    "DescriptorIndex",
    "DescriptorRecord",
    "DimensionError",
    "FeatureMap",
    "FormatError",
    "GroundTruth",
    "LogMarginals",
    "MarginalResiduals",
    "OtaggError",
    "PipelineConfig",
    "RecallReport",
    "SolverConfig",
    "SynthSpec",
    "asymmetric_transport",
    "build_index",
    "gen_dataset",
    "gen_params",
    "marginal_residuals",
    "read_descriptor_db",
    "read_ground_truth",
    "read_params",
    "read_tensor",
    "recall_at_k",
    "run_pipeline",
    "search",
    "sinkhorn_baseline",
    "write_descriptor_db",
    "write_ground_truth",
    "write_params",
    "write_tensor",
]
