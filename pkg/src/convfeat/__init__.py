"""Compile linear feature dictionaries into strided CNNs and build approximators on top."""

from .compiler import (
    ChannelSchedule,
    CompilationResult,
    compile_mixed,
    compile_pow2,
    max_relative_error,
    param_count,
    pow2_kernels,
    schedule,
    to_relu_form,
)
from .errors import BreakdownError, DimensionMismatch, FormatError, PreconditionError, SeparationError
from .patches import PatchBasis, build_patch_hierarchy, patches, span_basis
from .tensor import Activation, ConvLayer, ConvNet1D, ConvNet2D, conv1d, conv2d, eval_dcnn1d, eval_dcnn2d, toeplitz
from .vectorize import HierarchicalPartition, check_equivalence, compile_2d_dict, svd_extractor

__version__ = "0.1.0"

__all__ = [
    "ChannelSchedule", "CompilationResult", "compile_mixed", "compile_pow2",
    "max_relative_error", "param_count", "pow2_kernels", "schedule", "to_relu_form",
    "BreakdownError", "DimensionMismatch", "FormatError", "PreconditionError", "SeparationError",
    "PatchBasis", "build_patch_hierarchy", "patches", "span_basis",
    "Activation", "ConvLayer", "ConvNet1D", "ConvNet2D", "conv1d", "conv2d",
    "eval_dcnn1d", "eval_dcnn2d", "toeplitz",
    "HierarchicalPartition", "check_equivalence", "compile_2d_dict", "svd_extractor",
]
