"""ODAR: map data into a 2-D density space where outliers form their own cluster."""

__version__ = "0.1.0"

from .clustering import BackendSpec, ClusterLabels, cluster, delta_like, dpc, kmeans
from .dataset import Dataset, LabeledDataset, SyntheticSpec, generate, load_csv, write_csv
from .detector import DetectionResult, detect, detect_component, detect_nocomp, median_split
from .evaluation import (
    ConfusionCounts,
    SweepReport,
    balanced_accuracy,
    confusion_counts,
    parameter_sweep,
    top_percent,
)
from .exceptions import (
    DataError,
    EvaluationError,
    GenerationError,
    OdarError,
    ParameterError,
    ParseError,
    StructuralError,
    ValidationError,
)
from .neighbors import KnnDistances, SpatialIndex, build_index, knn_distances
from .transform import (
    DensityProfile,
    OdarSpace,
    assemble,
    construct_odar_space,
    high_order_density,
    local_density,
    shrink,
)
