"""Likelihood-ratio voice activity detection with decision-directed a priori
SNR estimation and a fixed-extension hangover."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DataError

NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class VadParams:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    log_threshold: float = 0.35
    dd_alpha: float = 0.98
    hangover_frames: int = 8
    min_run_for_hangover: int = 4
    noise_init_frames: int = 10
    noise_smoothing: float = 0.98

    def __post_init__(self):
        if not 0.0 < self.dd_alpha < 1.0:
            raise ValueError("dd_alpha must lie in (0, 1)")
        if not 0.0 <= self.noise_smoothing < 1.0:
            raise ValueError("noise_smoothing must lie in [0, 1)")
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be >= 0")
        if self.noise_init_frames < 1:
            raise ValueError("noise_init_frames must be >= 1")


@dataclass
class VadMask:
    frames: np.ndarray
    hop_s: float = 0.010

    def __len__(self):
        return self.frames.size

    def dump(self, path):
        Path(path).write_text("".join("1" if v else "0" for v in self.frames) + "\n")


def frame_count(n_samples, frame_len, hop):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def apply_hangover(raw, hangover, min_run):
    """Extend every speech run of at least ``min_run`` frames by ``hangover``
    frames. Never clears a speech frame."""
    raw = np.asarray(raw, dtype=bool)
    out = raw.copy()
    if hangover == 0 or raw.size == 0:
        return out
    d = np.diff(np.concatenate([[0], raw.astype(np.int8), [0]]))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    for s, e in zip(starts, ends):
        if e - s >= min_run:
            out[e:e + hangover] = True
    return out


def frame_llr(seg, params=VadParams()):
    """Per-frame mean log-likelihood ratio and the raw (pre-hangover) decision."""
    fs = seg.sample_rate
    L = int(round(params.frame_len_ms * fs / 1000))
    H = int(round(params.hop_ms * fs / 1000))
    x = seg.samples
    n_frames = frame_count(x.size, L, H)
    if n_frames == 0:
        raise DataError(f"segment of {x.size} samples is shorter than one {L}-sample frame")

    idx = np.arange(L)[None, :] + H * np.arange(n_frames)[:, None]
    nfft = 1 << int(np.ceil(np.log2(L)))
    power = np.abs(np.fft.rfft(x[idx] * np.hamming(L), nfft, axis=1)) ** 2

    noise = np.maximum(power[: params.noise_init_frames].mean(axis=0), NOISE_FLOOR)
    a = params.dd_alpha
    mu = params.noise_smoothing
    llr = np.empty(n_frames)
    raw = np.empty(n_frames, dtype=bool)
    clean_prev = np.zeros(power.shape[1])
    for k in range(n_frames):
        gamma = power[k] / noise
        xi = a * clean_prev / noise + (1.0 - a) * np.maximum(gamma - 1.0, 0.0)
        lam = gamma * xi / (1.0 + xi) - np.log1p(xi)
        llr[k] = lam.mean()
        raw[k] = llr[k] > params.log_threshold
        # clean-speech power estimate through the Wiener gain
        clean_prev = (xi / (1.0 + xi)) ** 2 * power[k]
        if not raw[k]:
            noise = np.maximum(mu * noise + (1.0 - mu) * power[k], NOISE_FLOOR)
    return llr, raw


def detect(seg, params=VadParams()):
    """Speech/non-speech mask at one decision per hop."""
    _, raw = frame_llr(seg, params)
    mask = apply_hangover(raw, params.hangover_frames, params.min_run_for_hangover)
    return VadMask(mask, params.hop_ms / 1000.0)
