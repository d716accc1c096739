"""Delimiter-separated table IO.

All artifacts are comma-separated UTF-8 text with a header row and a
deterministic row order; floats carry 17 significant digits so values
round-trip exactly through text.
"""

import os

import pandas as pd

from .errors import MissingInput

FLOAT_FORMAT = "%.17g"

FIRM_FILE_COLUMNS = ["firm_id", "sector", "year", "value_added", "capital",
                     "labor_count", "materials", "p_g", "p_m",
                     "omega", "omega_x", "x", "y"]
MATCH_FILE_COLUMNS = ["worker_id", "firm_id", "year", "earnings", "age",
                      "sex", "owner_flag", "alpha_i"]
FIRM_QUALITY_COLUMNS = ["firm_id", "year", "ln_y", "ln_x", "n_top", "n_nontop"]


def write_table(df: pd.DataFrame, path, columns=None) -> None:
    if columns is not None:
        columns = [c for c in columns if c in df.columns]
        df = df[columns]
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_table(path) -> pd.DataFrame:
    if not os.path.exists(path):
        raise MissingInput(f"missing input table: {path}")
    # the default float parser is not correctly rounded; round_trip makes
    # write -> read -> write byte-stable
    return pd.read_csv(path, float_precision="round_trip")


def write_manifest(path, entries: dict) -> None:
    """Write the resolved run configuration as sorted key=value lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(entries):
            fh.write(f"{key} = {entries[key]}\n")
