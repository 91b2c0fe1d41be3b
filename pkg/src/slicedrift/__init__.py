"""Label-free drift detection through weak data slices."""
from .data_model import (
    Dataset,
    Feature,
    FeatureSchema,
    SplitPair,
    load_dataset,
    resample_rows,
    save_dataset,
    stratified_split,
)
from .distortion import (
    PermutationConfig,
    RebalanceConfig,
    multiplier_to_mcr,
    permute_distort,
    rebalance_mcr,
    target_misclassified,
)
from .drift import DriftReport, detect_drift
from .slicing import (
    MappedSlice,
    SliceFinderConfig,
    SliceRule,
    SliceSet,
    find_weak_slices,
    map_slice,
    slice_summary,
)
from .stats import cohens_h, holm_bonferroni, hypergeom_sf, two_proportion_test
from .synthetic import make_synthetic

__version__ = "0.1.0"
