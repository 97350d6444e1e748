from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    return np.abs(analytic - numeric) / np.maximum(1e-12, np.abs(analytic) + np.abs(numeric))


def numeric_grad(f: Callable[[], float], theta: np.ndarray, h: float = 1e-5, coords=None) -> np.ndarray:
    """Central differences of f with respect to `theta` (perturbed in place, then restored)."""
    flat = theta.reshape(-1)
    out = np.full(flat.shape, np.nan)
    for k in range(flat.size) if coords is None else coords:
        orig = flat[k]
        flat[k] = orig + h
        fp = f()
        flat[k] = orig - h
        fm = f()
        flat[k] = orig
        out[k] = (fp - fm) / (2.0 * h)
    return out.reshape(theta.shape)


def finite_diff_check(
    f: Callable[[], float],
    params: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    h: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between `analytic` gradients and central differences of f.

    `f` must read the arrays in `params` (they are perturbed in place). With `max_coords`
    each parameter is checked on at most that many coordinates, chosen by `seed`.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, theta in params.items():
        coords = None
        if max_coords is not None and theta.size > max_coords:
            coords = np.sort(rng.choice(theta.size, size=max_coords, replace=False))
        num = numeric_grad(f, theta, h, coords)
        ana = np.asarray(analytic[name]).reshape(-1)
        numf = num.reshape(-1)
        idx = np.arange(numf.size) if coords is None else coords
        if idx.size:
            worst = max(worst, float(relative_error(ana[idx], numf[idx]).max()))
    return worst
