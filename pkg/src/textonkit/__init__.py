"""Compositional Gaussian texton engine.

A texture is a depth-ordered set of 2D Gaussians carrying appearance
features.  The package estimates such sets from soft segmentations,
rasterizes them by alpha compositing, measures objectives over them,
matches and edits them, and animates them through flow fields.
"""

from .animation import ShearFlow, VortexFlow, animate, set_at_time
from .editing import (
    ReshufflePlan,
    VariationEdit,
    interpolate,
    merge_patch_sets,
    modify_variations,
    propagate_edit,
    rescale_gaussians,
    reshuffle,
    spatial_morph,
    swap_coefficient,
    transfer_mean_align,
    transfer_replace,
    transform_texton,
)
from .estimation import (
    DenseMaps,
    SamplingMode,
    SegmentationStack,
    estimate_gaussians,
    gumbel_binary_sample,
)
from .formats import load_set, load_tensor, read_image, save_set, save_tensor, write_image
from .model import (
    AffineTransform2D,
    GaussianSet,
    ImageFrame,
    TextonGaussian,
    apply_affine,
    filter_in_bounds,
    validate_set,
)
from .objectives import (
    MatchWeights,
    TrainingWeights,
    combined_training_loss,
    compactness_loss,
    entropy_loss,
    hungarian_match,
    pair_cost,
    reconstruction_distance,
    set_matching_cost,
    texture_distance,
)
from .splatting import AlphaStack, FeatureGrid, alpha_maps, opacity_at, render_preview, splat
from .synth import WorldSpec, synth_world

__version__ = "0.1.0"

__all__ = [
    "AffineTransform2D",
    "AlphaStack",
    "DenseMaps",
    "FeatureGrid",
    "GaussianSet",
    "ImageFrame",
    "MatchWeights",
    "ReshufflePlan",
    "SamplingMode",
    "SegmentationStack",
    "ShearFlow",
    "TextonGaussian",
    "TrainingWeights",
    "VariationEdit",
    "VortexFlow",
    "WorldSpec",
    "alpha_maps",
    "animate",
    "apply_affine",
    "combined_training_loss",
    "compactness_loss",
    "entropy_loss",
    "estimate_gaussians",
    "filter_in_bounds",
    "gumbel_binary_sample",
    "hungarian_match",
    "interpolate",
    "load_set",
    "load_tensor",
    "merge_patch_sets",
    "modify_variations",
    "opacity_at",
    "pair_cost",
    "propagate_edit",
    "read_image",
    "reconstruction_distance",
    "rescale_gaussians",
    "reshuffle",
    "save_set",
    "save_tensor",
    "set_at_time",
    "set_matching_cost",
    "spatial_morph",
    "splat",
    "swap_coefficient",
    "synth_world",
    "texture_distance",
    "transfer_mean_align",
    "transfer_replace",
    "transform_texton",
    "validate_set",
    "write_image",
]
