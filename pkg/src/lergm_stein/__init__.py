"""Stein method-of-moments estimation for block-local exponential random graph models."""

from .errors import (
    CapacityError,
    GraphFormatError,
    LergmError,
    NumericalError,
    SamplingError,
    SingularityError,
)
from .graph import BlockPartition, EdgeLabel, LergmGraph, enumerate_edge_labels, toggle_edge
from .params import ParameterVector
from .statistics import (
    ModelSpec,
    StatisticSpec,
    change_statistic,
    edges,
    eval_statistic,
    growth_constant,
    gwd,
    gwd_bipartite,
    poch,
    poch_bipartite,
    removal_difference,
)
from .sampler import (
    SamplerConfig,
    enumerate_block_distribution,
    exact_expectation,
    glauber_sweep,
    sample_lergm,
)

__version__ = "0.1.0"
