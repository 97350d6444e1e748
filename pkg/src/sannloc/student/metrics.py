"""Ranking and regression metrics."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata


class SingleClassSet(ValueError):
    pass


class ZeroVarianceTruth(ValueError):
    """R^2 is undefined when all truths are equal; `rmse` is still available."""

    def __init__(self, rmse: float):
        super().__init__("truth values have zero variance; R^2 undefined")
        self.rmse = rmse


def auc(scores: Iterable[tuple[float, int]]) -> float:
    """Mann-Whitney U / (n_pos * n_neg) with ties counted one half."""
    pairs = list(scores)
    s = np.array([p[0] for p in pairs], dtype=np.float64)
    y = np.array([int(p[1]) for p in pairs])
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassSet("AUC needs both positive and negative labels")
    # average ranks give every tie half credit
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def regression_metrics(preds: Sequence[float], truths: Sequence[float]) -> tuple[float, float]:
    """(RMSE, R^2) with R^2 = 1 - SS_res / SS_tot about the truth mean."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size < 2:
        raise ValueError("need equal-length sequences of at least two values")
    ss_res = float(((p - t) ** 2).sum())
    rmse = math.sqrt(ss_res / p.size)
    ss_tot = float(((t - t.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVarianceTruth(rmse)
    return rmse, 1.0 - ss_res / ss_tot
