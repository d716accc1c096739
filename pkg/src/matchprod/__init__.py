"""Assortative-matching production model and its estimation pipeline.

Library layout:

- ``params`` / ``model`` / ``oracle``: the structural model, its closed-form
  matching equilibrium, and independent residual oracles.
- ``simulate``: synthetic firm panels and matched employer-employee records.
- ``akm``: two-way fixed-effects earnings decomposition and worker quality.
- ``paretotail``: log-rank Pareto tail estimation.
- ``prodfn``: two-stage proxy-variable production-function GMM.
- ``matcheff``: match-efficiency AR(1) estimation.
- ``aggdecomp``: aggregation, Olley-Pakes and four-term decompositions.
- ``cli``: the `matchprod` command-line pipeline.
"""

from .params import EquilibriumConstants, ModelParams
from .model import (
    PamCheck,
    cobb_douglas_constants,
    equilibrium_constants,
    inverse_match,
    labor_demand,
    match_top_type,
    output_ces,
    output_matched,
    pam_conditions,
    wage_rate,
)

__version__ = "0.1.0"

__all__ = [
    "EquilibriumConstants",
    "ModelParams",
    "PamCheck",
    "cobb_douglas_constants",
    "equilibrium_constants",
    "inverse_match",
    "labor_demand",
    "match_top_type",
    "output_ces",
    "output_matched",
    "pam_conditions",
    "wage_rate",
    "__version__",
]
