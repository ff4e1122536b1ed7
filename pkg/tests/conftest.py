import numpy as np
import pytest

import flowsup as fs


def central_diff(fun, x, h=1e-4, coords=None):
    """Central finite differences of a scalar function over array entries."""
    g = np.zeros_like(x)
    if coords is None:
        coords = list(np.ndindex(x.shape))
    for idx in coords:
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


def rel_err(analytic, reference, coords=None):
    if coords is not None:
        sel = tuple(np.array(coords).T)
        analytic = analytic[sel]
        reference = reference[sel]
    scale = np.abs(reference).max()
    if scale == 0.0:
        return np.abs(analytic).max()
    return np.abs(analytic - reference).max() / scale


def random_image(rng, h, w, c=3, lo=0.05, hi=0.95):
    return fs.Image(rng.uniform(lo, hi, (h, w, c)))


def random_flow(rng, h, w, scale=1.5):
    return fs.FlowField(rng.uniform(-scale, scale, (h, w, 2)))


def random_mask(rng, h, w, p=0.3):
    return fs.VisibilityMask((rng.uniform(0, 1, (h, w)) > p).astype(float))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
