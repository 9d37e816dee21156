"""Frame-level low-level descriptors (LLDs) and the 1582-dimensional acoustic
feature vector built from them."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from . import lpc as _lpc
from . import pitch as _pitch
from .corpus import DataError
from .functionals import FUNCTIONALS, PITCH_FUNCTIONALS, apply_functionals

FRAME_RATE = 100
N_MEL = 26
N_MFCC = 15
N_LOGMEL = 8
LPC_ORDER = 8
LOG_FLOOR = 1e-10

SET_A = (
    ("loudness",)
    + tuple(f"mfcc{i}" for i in range(N_MFCC))
    + tuple(f"logMelFreqBand{i}" for i in range(N_LOGMEL))
    + tuple(f"lspFreq{i}" for i in range(LPC_ORDER))
    + ("f0_env", "voicing_prob")
)
SET_B = ("f0_final", "jitter_local", "jitter_ddp", "shimmer_local")
EXTRAS = ("f0_onsets", "turn_duration_s")

assert len(SET_A) == 34 and len(SET_B) == 4


def _build_names():
    names, source = [], {}
    for group, funcs in ((SET_A, FUNCTIONALS), (SET_B, PITCH_FUNCTIONALS)):
        for lld in group:
            for suffix in ("", "_de"):
                for f in funcs:
                    name = f"{lld}{suffix}_{f}"
                    names.append(name)
                    source[name] = lld
    for name in EXTRAS:
        names.append(name)
        # both are turn-level statistics of the F0 track
        source[name] = "f0_final"
    return tuple(names), source


FEATURE_NAMES, SOURCE_LLD = _build_names()
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 34 * 2 * 21 + 4 * 2 * 19 + 2 == 1582


@dataclass(frozen=True)
class AcousticParams:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    mel_fmin: float = 20.0
    mel_fmax: float = 8000.0
    loudness_exponent: float = 0.3
    pitch: _pitch.PitchParams = _pitch.PitchParams()


@dataclass
class LldSeries:
    """Smoothed LLD columns, their deltas and the voicing mask (100 frames/s)."""

    columns: dict
    deltas: dict
    voiced_mask: np.ndarray
    n_samples: int
    sample_rate: int
    frame_rate: int = FRAME_RATE

    @property
    def n_frames(self):
        return self.voiced_mask.size

    @property
    def duration(self):
        return self.n_samples / self.sample_rate


@dataclass
class AcousticVector:
    values: np.ndarray
    names: tuple = FEATURE_NAMES
    quality: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(zip(self.names, self.values))


def smooth_ma3(x):
    """Three-point moving average, window clipped at the edges."""
    x = np.asarray(x, dtype=np.float64)
    if x.size <= 1:
        return x.copy()
    s = x.copy()
    s[1:] += x[:-1]
    s[:-1] += x[1:]
    cnt = np.full(x.size, 3.0)
    cnt[0] = cnt[-1] = 2.0
    return s / cnt


def delta_regression(x, W=2):
    """First-order regression coefficients over ``±W`` frames with edge
    replication."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    p = np.pad(x, W, mode="edge")
    n = x.size
    num = np.zeros(n)
    for i in range(1, W + 1):
        num += i * (p[W + i:W + i + n] - p[W - i:W - i + n])
    return num / (2.0 * sum(i * i for i in range(1, W + 1)))


def _runs(mask):
    d = np.diff(np.concatenate([[0], np.asarray(mask, dtype=np.int8), [0]]))
    return zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1))


def _within_runs(fn, x, mask):
    """Apply ``fn`` separately to each run of ``mask``; zero elsewhere."""
    out = np.zeros_like(x, dtype=np.float64)
    for s, e in _runs(mask):
        out[s:e] = fn(x[s:e])
    return out


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(fs, nfft, n_bands=N_MEL, fmin=20.0, fmax=8000.0):
    """Triangular filters on the mel scale, evaluated at the FFT bin centres."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_bands + 2))
    freqs = np.arange(nfft // 2 + 1) * fs / nfft
    fb = np.zeros((n_bands, freqs.size))
    for b in range(n_bands):
        lo, mid, hi = edges[b:b + 3]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[b] = np.maximum(0.0, np.minimum(up, down))
    return fb


def n_frames_for(n_samples, frame_len=400, hop=160):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def spectral_llds(frames, fs, params=AcousticParams()):
    """Loudness, log-mel energies and MFCCs from windowed 25 ms frames."""
    L = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(L)))
    power = np.abs(np.fft.rfft(frames, nfft, axis=1)) ** 2
    fb = mel_filterbank(fs, nfft, N_MEL, params.mel_fmin, params.mel_fmax)
    mel = power @ fb.T
    loudness = np.sum(mel, axis=1) ** params.loudness_exponent
    logmel = np.log(np.maximum(mel, LOG_FLOOR))
    mfcc = mfcc_from_logmel(logmel)
    return loudness, logmel, mfcc


def mfcc_from_logmel(logmel):
    return dct(logmel, type=2, norm="ortho", axis=-1)[..., :N_MFCC]


def extract_llds(seg, vad, params=AcousticParams()):
    """Compute every LLD column for ``seg`` aligned with the VAD framing.

    Pitch-based columns are restricted to voiced frames (voicing probability
    above threshold and VAD speech); their smoothing and deltas run inside
    each voiced stretch so unvoiced frames stay exactly zero.
    """
    fs = seg.sample_rate
    x = seg.samples
    L = int(round(params.frame_len_ms * fs / 1000))
    H = int(round(params.hop_ms * fs / 1000))
    P = int(round(params.pitch.window_ms * fs / 1000))
    if x.size < P:
        raise DataError(f"segment {seg.segment_id!r} is shorter than the {P}-sample pitch window")
    n = n_frames_for(x.size, L, H)
    vad_frames = np.asarray(vad.frames if hasattr(vad, "frames") else vad, dtype=bool)
    if vad_frames.size != n:
        raise ValueError(f"VAD mask has {vad_frames.size} frames, expected {n}")

    idx = np.arange(L)[None, :] + H * np.arange(n)[:, None]
    frames = x[idx] * np.hamming(L)
    loudness, logmel, mfcc = spectral_llds(frames, fs, params)
    lsp = _lpc.lpc_to_lsp(_lpc.lpc(frames, LPC_ORDER))

    centers = H * np.arange(n) + L // 2
    pframes = _pitch.centered_frames(x, centers, P)
    pwin = np.hanning(P + 2)[1:-1]
    f0 = _pitch.shs_pitch(pframes * pwin, fs, params.pitch)
    vprob = _pitch.voicing_probability(pframes, fs, pwin, params.pitch)
    voiced = (vprob >= params.pitch.voicing_threshold) & vad_frames
    f0 = np.where(voiced, f0, 0.0)
    f0_env = _pitch.f0_envelope(f0, params.pitch.env_decay)
    periods = _pitch.period_marks(x, fs, f0, voiced, centers, params.pitch)
    jit, ddp, shim = _pitch.perturbation(periods, centers, P // 2, voiced)

    raw = {"loudness": loudness}
    for i in range(N_MFCC):
        raw[f"mfcc{i}"] = mfcc[:, i]
    for i in range(N_LOGMEL):
        raw[f"logMelFreqBand{i}"] = logmel[:, i]
    for i in range(LPC_ORDER):
        raw[f"lspFreq{i}"] = lsp[:, i]
    raw["f0_env"] = f0_env
    raw["voicing_prob"] = vprob
    pitch_raw = {"f0_final": f0, "jitter_local": jit, "jitter_ddp": ddp, "shimmer_local": shim}

    columns, deltas = {}, {}
    for name in SET_A:
        columns[name] = smooth_ma3(raw[name])
        deltas[name] = delta_regression(columns[name])
    for name in SET_B:
        columns[name] = _within_runs(smooth_ma3, pitch_raw[name], voiced)
        deltas[name] = _within_runs(delta_regression, columns[name], voiced)
    return LldSeries(columns, deltas, voiced, x.size, fs)


def count_onsets(mask):
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return 0
    return int(np.count_nonzero(~m[:-1] & m[1:]))


def acoustic_vector(llds):
    """Functionals of every LLD trajectory, in the fixed canonical order."""
    if llds.n_frames == 0:
        raise ValueError("empty LLD series")
    vals = []
    for name in SET_A:
        vals.append(apply_functionals(llds.columns[name]))
        vals.append(apply_functionals(llds.deltas[name]))
    voiced = llds.voiced_mask
    quality = {"voiced_frames": int(np.count_nonzero(voiced))}
    if not voiced.any():
        quality["no_voiced_frames"] = True
    for name in SET_B:
        for series in (llds.columns[name], llds.deltas[name]):
            v = series[voiced] if voiced.any() else np.zeros(1)
            vals.append(apply_functionals(v, subset=True))
    vals.append(np.array([count_onsets(voiced), llds.duration], dtype=np.float64))
    values = np.concatenate(vals)
    if values.size != N_FEATURES:
        raise AssertionError(f"acoustic vector has {values.size} values, expected {N_FEATURES}")
    return AcousticVector(values, FEATURE_NAMES, quality)
