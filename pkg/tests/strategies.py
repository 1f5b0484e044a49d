"""Hypothesis strategies shared by the property tests."""
import numpy as np
from hypothesis import assume, strategies as st


@st.composite
def distances(draw, min_n=3, max_n=12, lo=1.0, hi=32.0):
    n = draw(st.integers(min_n, max_n))
    r = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n, unique=True))
    r = np.sort(np.array(r))
    assume(np.var(np.log2(r)) > 1e-3)
    return r


@st.composite
def paths(draw, min_n=3, max_n=12):
    r = draw(distances(min_n, max_n))
    d2s = draw(st.floats(1.0, 10.0))
    l4 = draw(st.floats(35.0, 60.0))
    noise = draw(st.lists(st.floats(-2.0, 2.0), min_size=len(r), max_size=len(r)))
    levels = l4 - d2s * np.log2(r / 4.0) + np.array(noise)
    return r, levels


def log_linear_levels(distances, d2s, lpas4m):
    return lpas4m - d2s * np.log2(np.asarray(distances, float) / 4.0)
