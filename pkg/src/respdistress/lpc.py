"""Linear prediction and line spectral pairs, vectorised over frames."""

import numpy as np


def autocorr(frames, order):
    """Biased autocorrelation lags ``0..order`` of each row."""
    frames = np.atleast_2d(frames)
    n = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    r = np.fft.irfft(np.abs(spec) ** 2, nfft, axis=1)
    return r[:, : order + 1]


def levinson(r, order):
    """Levinson-Durbin recursion.

    Parameters
    ----------
    r : ndarray, shape (n_frames, order + 1)
        Autocorrelation sequences.

    Returns
    -------
    a : ndarray, shape (n_frames, order + 1)
        Prediction polynomials ``A(z) = 1 + a1 z^-1 + ...``. Rows with zero
        energy get ``A(z) = 1``.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    m = r.shape[0]
    a = np.zeros((m, order + 1))
    a[:, 0] = 1.0
    err = r[:, 0].copy()
    live = err > 0
    err[~live] = 1.0
    for i in range(1, order + 1):
        acc = r[:, i] + np.sum(a[:, 1:i] * r[:, i - 1:0:-1], axis=1)
        k = np.where(live, -acc / err, 0.0)
        a_prev = a[:, 1:i].copy()
        a[:, 1:i] = a_prev + k[:, None] * a_prev[:, ::-1]
        a[:, i] = k
        err = err * (1.0 - k * k)
        # numerically singular frames: freeze the recursion
        dead = err <= 1e-15 * r[:, 0]
        if np.any(dead & live):
            live = live & ~dead
            err[~live] = 1.0
    return a


def lpc(frames, order):
    r = autocorr(frames, order)
    # slight white-noise correction keeps the recursion well conditioned
    r[:, 0] *= 1.0 + 1e-9
    return levinson(r, order)


def _roots_batch(poly):
    """Roots of each row polynomial (highest power first, monic) via
    companion-matrix eigenvalues."""
    m, deg1 = poly.shape
    deg = deg1 - 1
    comp = np.zeros((m, deg, deg))
    comp[:, 0, :] = -poly[:, 1:] / poly[:, :1]
    comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
    return np.linalg.eigvals(comp)


def lpc_to_lsp(a):
    """Line spectral frequencies (radians, ascending, in (0, pi)) of even-order
    minimum-phase polynomials ``a``, shape (n_frames, order + 1)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    p = a.shape[1] - 1
    if p % 2:
        raise ValueError("only even LPC orders are supported")
    ext = np.concatenate([a, np.zeros((a.shape[0], 1))], axis=1)
    rev = ext[:, ::-1]
    P = ext + rev  # symmetric, root at z = -1
    Q = ext - rev  # antisymmetric, root at z = +1
    # deflate the trivial roots
    P = _deflate(P, -1.0)
    Q = _deflate(Q, 1.0)
    wp = _upper_angles(_roots_batch(P), p // 2)
    wq = _upper_angles(_roots_batch(Q), p // 2)
    return np.sort(np.concatenate([wp, wq], axis=1), axis=1)


def _deflate(poly, root):
    """Divide each row by (z - root) via synthetic division."""
    m, n = poly.shape
    out = np.zeros((m, n - 1))
    acc = np.zeros(m)
    for i in range(n - 1):
        acc = poly[:, i] + root * acc
        out[:, i] = acc
    return out


def _upper_angles(roots, count):
    # conjugate pairs collapse onto one angle in (0, pi); keep one of each
    ang = np.sort(np.abs(np.angle(roots)), axis=1)
    return ang[:, 1::2][:, :count]


def lsp_to_lpc(lsf):
    """Rebuild the prediction polynomial from ascending line spectral frequencies."""
    lsf = np.atleast_2d(np.asarray(lsf, dtype=np.float64))
    m, p = lsf.shape
    out = np.empty((m, p + 1))
    for r in range(m):
        P = np.array([1.0, 1.0])
        Q = np.array([1.0, -1.0])
        for w in lsf[r, 0::2]:
            P = np.convolve(P, [1.0, -2.0 * np.cos(w), 1.0])
        for w in lsf[r, 1::2]:
            Q = np.convolve(Q, [1.0, -2.0 * np.cos(w), 1.0])
        out[r] = 0.5 * (P + Q)[: p + 1]
    return out
