"""Pitch-related descriptors on a 60 ms analysis window.

F0 comes from subharmonic summation over the magnitude spectrum; voicing
probability from the window-corrected normalised autocorrelation; jitter and
shimmer from explicit pitch-period marks (positive-going zero crossings that
are tracked cycle to cycle by waveform similarity).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class PitchParams:
    window_ms: float = 60.0
    f0_min: float = 55.0
    f0_max: float = 400.0
    n_harmonics: int = 15
    compression: float = 0.85
    voicing_threshold: float = 0.55
    steps_per_octave: int = 96
    nfft: int = 4096
    env_decay: float = 0.99


def centered_frames(x, centers, length):
    """Rows of ``x`` of ``length`` samples centred on ``centers``, zero padded."""
    half = length // 2
    pad = np.concatenate([np.zeros(half), x, np.zeros(length)])
    idx = np.asarray(centers)[:, None] + np.arange(length)[None, :]
    return pad[idx]


def candidate_grid(params):
    n = int(np.floor(params.steps_per_octave * np.log2(params.f0_max / params.f0_min))) + 1
    return params.f0_min * 2.0 ** (np.arange(n) / params.steps_per_octave)


@lru_cache(maxsize=8)
def _shs_matrix(params, fs):
    """Linear map from a magnitude spectrum to subharmonic sums on the
    candidate grid (harmonic n weighted by ``compression ** (n - 1)``)."""
    cands = candidate_grid(params)
    n_bins = params.nfft // 2 + 1
    W = np.zeros((n_bins, cands.size))
    cols = np.arange(cands.size)
    for h in range(1, params.n_harmonics + 1):
        b = h * cands * params.nfft / fs
        ok = b < n_bins - 1
        i = np.floor(b[ok]).astype(int)
        frac = b[ok] - i
        weight = params.compression ** (h - 1)
        np.add.at(W, (i, cols[ok]), weight * (1.0 - frac))
        np.add.at(W, (i + 1, cols[ok]), weight * frac)
    used = np.flatnonzero(W.any(axis=1)).max() + 1
    return W[:used], cands


def shs_pitch(frames, fs, params=PitchParams()):
    """Subharmonic-summation F0 (Hz) for each windowed frame row."""
    W, cands = _shs_matrix(params, fs)
    mag = np.abs(np.fft.rfft(frames, params.nfft, axis=1))[:, : W.shape[0]]
    score = mag @ W
    j = np.argmax(score, axis=1)
    # parabolic refinement on the log-frequency grid
    jj = np.clip(j, 1, cands.size - 2)
    rows = np.arange(score.shape[0])
    a, b, c = score[rows, jj - 1], score[rows, jj], score[rows, jj + 1]
    den = a - 2 * b + c
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.where(den < 0, 0.5 * (a - c) / den, 0.0)
    delta = np.where(j == jj, np.clip(delta, -0.5, 0.5), 0.0)
    return cands[j] * 2.0 ** (delta / params.steps_per_octave)


def voicing_probability(frames, fs, window, params=PitchParams()):
    """Peak of the window-corrected normalised autocorrelation in the F0 lag
    range, clipped to [0, 1]. Zero-energy frames give 0."""
    n = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    x = frames - frames.mean(axis=1, keepdims=True)
    x = x * window
    r = np.fft.irfft(np.abs(np.fft.rfft(x, nfft, axis=1)) ** 2, nfft, axis=1)
    rw = np.fft.irfft(np.abs(np.fft.rfft(window, nfft)) ** 2, nfft)
    lo = int(np.floor(fs / params.f0_max))
    hi = int(np.ceil(fs / params.f0_min))
    r0 = r[:, :1]
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = (r[:, lo:hi + 1] / r0) / (rw[lo:hi + 1] / rw[0])
    peak = np.where(r0[:, 0] > 1e-20, np.max(norm, axis=1), 0.0)
    return np.clip(np.nan_to_num(peak), 0.0, 1.0)


def f0_envelope(f0, decay):
    """Peak-hold envelope with exponential decay across unvoiced gaps."""
    env = np.empty_like(f0)
    cur = 0.0
    for k, v in enumerate(f0):
        cur = max(v, cur * decay) if v > 0 else cur * decay
        env[k] = cur
    return env


# ---------------------------------------------------------------------------
# period marks


@dataclass
class Periods:
    start: np.ndarray  # fractional sample index of each cycle start
    length: np.ndarray  # samples
    amplitude: np.ndarray  # peak absolute amplitude inside the cycle
    chain: np.ndarray  # cycles with equal chain ids are contiguous

    @property
    def end(self):
        return self.start + self.length


def _crossings(x):
    i = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    return i + x[i] / (x[i] - x[i + 1])


def _similarity(x, a, b, n):
    ia, ib = int(a), int(b)
    if ib + n > x.size or n < 2:
        return -1.0
    u = x[ia:ia + n]
    v = x[ib:ib + n]
    den = np.sqrt(np.dot(u, u) * np.dot(v, v))
    return np.dot(u, v) / den if den > 0 else -1.0


def period_marks(x, fs, f0, voiced, centers, params=PitchParams(), min_similarity=0.5):
    """Track glottal cycles through every voiced run.

    ``f0`` and ``voiced`` are per-frame tracks with frame centres
    ``centers`` (samples). Returns a :class:`Periods` table.
    """
    half = int(round(params.window_ms * fs / 1000)) // 2
    zc = _crossings(x)
    starts, lengths, amps, chains = [], [], [], []
    chain_id = 0
    d = np.diff(np.concatenate([[0], voiced.astype(np.int8), [0]]))
    for k0, k1 in zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)):
        lo = max(centers[k0] - half, 0)
        hi = min(centers[k1 - 1] + half, x.size - 1)
        run_c = centers[k0:k1]
        run_f0 = f0[k0:k1]
        pos = np.searchsorted(zc, lo)
        if pos >= zc.size:
            continue
        t = zc[pos]
        chain_id += 1
        while t < hi:
            T = fs / run_f0[min(np.searchsorted(run_c, t), run_f0.size - 1)]
            a = np.searchsorted(zc, t + 0.7 * T)
            b = np.searchsorted(zc, t + 1.4 * T)
            best, best_s = None, min_similarity
            n = int(round(0.5 * T))
            for c in zc[a:b]:
                if c > hi:
                    break
                s = _similarity(x, t, c, n)
                # prefer the candidate nearest the expected period on near ties
                s -= 0.05 * abs(c - t - T) / T
                if s > best_s:
                    best, best_s = c, s
            if best is None:
                nxt = np.searchsorted(zc, t + 0.7 * T)
                if nxt >= zc.size:
                    break
                t = zc[nxt]
                chain_id += 1
                continue
            i0 = int(np.floor(t))
            i1 = int(np.ceil(best))
            starts.append(t)
            lengths.append(best - t)
            amps.append(np.max(np.abs(x[i0:i1 + 1])))
            chains.append(chain_id)
            t = best
        chain_id += 1
    return Periods(np.array(starts, dtype=np.float64), np.array(lengths, dtype=np.float64),
                   np.array(amps, dtype=np.float64), np.array(chains, dtype=np.int64))


def perturbation(periods, centers, half, voiced):
    """Per-frame jitter (local, ddp) and shimmer (local) over the cycles that
    lie entirely inside each frame's analysis window."""
    n_frames = centers.size
    jit = np.zeros(n_frames)
    ddp = np.zeros(n_frames)
    shim = np.zeros(n_frames)
    if periods.start.size == 0:
        return jit, ddp, shim
    T = periods.length
    A = periods.amplitude
    ch = periods.chain
    same1 = np.concatenate([[False], ch[1:] == ch[:-1]])
    same2 = np.concatenate([[False, False], ch[2:] == ch[:-2]]) if T.size > 2 else np.zeros(T.size, bool)
    dT = np.concatenate([[0.0], np.diff(T)])
    d1 = np.where(same1, np.abs(dT), 0.0)
    d2 = np.where(same2, np.abs(np.concatenate([[0.0], np.diff(dT)])), 0.0)
    dA = np.where(same1, np.abs(np.concatenate([[0.0], np.diff(A)])), 0.0)

    def csum(v):
        return np.concatenate([[0.0], np.cumsum(v)])

    cT, cA = csum(T), csum(A)
    c1, n1 = csum(d1), csum(same1.astype(float))
    c2, n2 = csum(d2), csum(same2.astype(float))
    cdA = csum(dA)

    lo = np.searchsorted(periods.start, centers - half, side="left")
    hi = np.searchsorted(periods.end, centers + half, side="right")
    hi = np.maximum(hi, lo)
    count = hi - lo
    # pairs/triples must have all members inside [lo, hi)
    lo1 = np.minimum(lo + 1, hi)
    lo2 = np.minimum(lo + 2, hi)
    np1 = n1[hi] - n1[lo1]
    np2 = n2[hi] - n2[lo2]
    with np.errstate(invalid="ignore", divide="ignore"):
        meanT = (cT[hi] - cT[lo]) / count
        meanA = (cA[hi] - cA[lo]) / count
        jit = np.where(np1 > 0, (c1[hi] - c1[lo1]) / np1 / meanT, 0.0)
        ddp = np.where(np2 > 0, (c2[hi] - c2[lo2]) / np2 / meanT, 0.0)
        shim = np.where((np1 > 0) & (meanA > 0), (cdA[hi] - cdA[lo1]) / np1 / meanA, 0.0)
    jit = np.where(voiced, np.nan_to_num(jit), 0.0)
    ddp = np.where(voiced, np.nan_to_num(ddp), 0.0)
    shim = np.where(voiced, np.nan_to_num(shim), 0.0)
    return jit, ddp, shim
