"""Summary statistics ("functionals") that collapse a per-frame trajectory into
a fixed number of values.

The same code serves the acoustic and the prosodic feature sets.
"""

import numpy as np

FUNCTIONALS = (
    "maxPos",
    "minPos",
    "amean",
    "stddev",
    "skewness",
    "kurtosis",
    "quartile1",
    "quartile2",
    "quartile3",
    "iqr1-2",
    "iqr2-3",
    "iqr1-3",
    "percentile1.0",
    "percentile99.0",
    "pctlrange0-1",
    "upleveltime75",
    "upleveltime90",
    "linregc1",
    "linregc2",
    "linregerrQ",
    "linregerrA",
)

# Pitch-based descriptors are only defined on voiced frames; the uplevel
# times carry little information there and are dropped.
PITCH_FUNCTIONALS = tuple(f for f in FUNCTIONALS if not f.startswith("uplevel"))

_PITCH_IDX = np.array([FUNCTIONALS.index(f) for f in PITCH_FUNCTIONALS])

_STD_EPS = 1e-12


def apply_functionals(x, subset=False):
    """Compute the 21 functionals of a 1-D sequence.

    Parameters
    ----------
    x : array_like
        Non-empty real sequence.
    subset : bool
        If True return only the 19 values of ``PITCH_FUNCTIONALS``.

    Returns
    -------
    numpy.ndarray
        Values in the order of ``FUNCTIONALS`` (or ``PITCH_FUNCTIONALS``).

    Notes
    -----
    Relative positions are ``argmax / (n - 1)`` (first occurrence, 0 for n=1).
    Moments are population moments; skewness and kurtosis (non-excess) are 0
    when the standard deviation is below 1e-12 (a constant sequence has std
    exactly 0). Quantiles interpolate
    linearly at rank ``q * (n - 1)``. The uplevel times are the fraction of
    values strictly above ``min + q * range``, or 1 when the range is 0. The
    regression is ordinary least squares against the index; the two error
    values are the RMS and the mean absolute residual.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if n == 0:
        raise ValueError("functionals of an empty sequence are undefined")

    out = np.empty(len(FUNCTIONALS))
    denom = max(n - 1, 1)
    out[0] = np.argmax(x) / denom
    out[1] = np.argmin(x) / denom

    lo = x.min()
    rng = x.max() - lo
    # a constant sequence has exactly zero spread; the summation error of
    # the mean must not leak into std, skewness or kurtosis
    mean = x.mean() if rng > 0 else lo
    centered = x - mean
    var = np.mean(centered**2)
    std = np.sqrt(var)
    out[2] = mean
    out[3] = std
    if std < _STD_EPS:
        out[4] = 0.0
        out[5] = 0.0
    else:
        out[4] = np.mean(centered**3) / std**3
        out[5] = np.mean(centered**4) / var**2

    q1, q2, q3, p1, p99 = np.percentile(x, [25, 50, 75, 1, 99])
    out[6:9] = q1, q2, q3
    out[9] = q2 - q1
    out[10] = q3 - q2
    out[11] = q3 - q1
    out[12] = p1
    out[13] = p99
    out[14] = p99 - p1

    if rng == 0.0:
        out[15] = out[16] = 1.0
    else:
        out[15] = np.count_nonzero(x > lo + 0.75 * rng) / n
        out[16] = np.count_nonzero(x > lo + 0.90 * rng) / n

    if n == 1:
        slope, offset = 0.0, x[0]
    else:
        k = np.arange(n, dtype=np.float64)
        kc = k - k.mean()
        slope = np.dot(kc, centered) / np.dot(kc, kc)
        offset = mean - slope * k.mean()
    resid = x - (offset + slope * np.arange(n))
    out[17] = slope
    out[18] = offset
    out[19] = np.sqrt(np.mean(resid**2))
    out[20] = np.mean(np.abs(resid))

    if subset:
        return out[_PITCH_IDX]
    return out
