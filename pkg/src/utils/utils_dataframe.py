# -*- coding: utf-8 -*-
from __future__ import annotations

from typing import Sequence

import pandas as pd


# ============================ DATAFRAME UTILS ============================

def order_columns(df: pd.DataFrame, leading: Sequence[str]) -> pd.DataFrame:
    """Move the 'leading' columns (those present) to the front, keep the rest in place."""
    if df is None or df.empty:
        return df
    front = [c for c in leading if c in df.columns]
    rest = [c for c in df.columns if c not in front]
    return df[front + rest]
