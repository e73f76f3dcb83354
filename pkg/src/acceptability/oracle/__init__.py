from .exact import (
    CapitalLP,
    ExactPipeline,
    NodeHoldings,
    OracleSizeError,
    exact_grid_minimum,
    exact_pipeline,
    min_capital_lp,
    tree_nodes,
)
from .simplex import InfeasibleError, LPSolution, UnboundedError, simplex
