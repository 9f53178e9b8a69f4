"""Python interface to the DANSE state-estimation core.

The heavy lifting lives in the compiled ``_danse`` extension; this
package re-exports it under stable names.
"""

from _danse import (
    PriorNet,
    filter_trajectory,
    forecast_next,
    generate,
    kalman_filter,
    load_checkpoint,
    log_pdf,
    measure_smnr,
    nmse,
    posterior_update,
    predictive_measurement,
    save_checkpoint,
    taylor_matrix_exp,
    train,
)

__all__ = [
    "PriorNet",
    "filter_trajectory",
    "forecast_next",
    "generate",
    "kalman_filter",
    "load_checkpoint",
    "log_pdf",
    "measure_smnr",
    "nmse",
    "posterior_update",
    "predictive_measurement",
    "save_checkpoint",
    "taylor_matrix_exp",
    "train",
]
