from enum import Enum


class PrimitiveKind(Enum):
    MATMUL = "matmul"
    POINTWISE_LINEAR = "pointwise-linear"
    GROUPED_POINTWISE_LINEAR = "grouped-pointwise-linear"
    SOFTMAX = "softmax-over-axis"
    TANH = "tanh"
    RELU = "relu"
    HADAMARD = "hadamard"
    SIGNED_SQRT = "signed-sqrt"
    BATCH_NORM = "batch-norm"
    GLOBAL_AVG_POOL = "global-average-pool"
    RESIDUAL_ADD = "residual-add"
    CONCAT = "concat-along-channel"
    SCALE = "scale-by-constant"


class AttentionMode(Enum):
    SEM = "sem"        # suppress the dominant region, enhance the rest
    ERASE = "erase"    # zero out the dominant region (erasing baseline)
    NONE = "none"      # every stage reuses the first guidance


class Variant(Enum):
    BASELINE = "baseline"          # global branch only
    PLAIN_STAGES = "plain-stages"  # m maps without SEM, no ICON
    NO_ICON = "no-icon"            # SEM stages, no ICON
    FULL = "full"


class Split(Enum):
    DATABASE = "database"
    QUERY = "query"
