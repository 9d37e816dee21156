"""Magnitude spectral subtraction."""

from dataclasses import dataclass

import numpy as np

from .corpus import DataError


class SegmentTooShort(DataError):
    """Segment cannot supply enough frames for the noise estimate.

    Callers are expected to skip enhancement rather than abort.
    """


@dataclass(frozen=True)
class EnhanceParams:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    oversubtraction: float = 2.0
    spectral_floor: float = 0.02
    noise_init_frames: int = 10

    def __post_init__(self):
        if self.frame_len_ms <= 0 or self.hop_ms <= 0 or self.hop_ms > self.frame_len_ms:
            raise ValueError("need 0 < hop_ms <= frame_len_ms")
        if self.oversubtraction < 0:
            raise ValueError("oversubtraction must be >= 0")
        if not 0.0 < self.spectral_floor < 1.0:
            raise ValueError("spectral_floor must lie in (0, 1)")
        if self.noise_init_frames < 1:
            raise ValueError("noise_init_frames must be >= 1")


def tight_window(frame_len, hop):
    """Analysis/synthesis window whose squared shifts by ``hop`` sum to one.

    Built as the square root of a Hann kernel convolved with a length-``hop``
    box, which makes the squared window constant-overlap-add at that hop.
    """
    g = np.hanning(frame_len - hop + 3)[1:-1]
    h = np.convolve(np.ones(hop), g)
    h /= g.sum()
    return np.sqrt(np.maximum(h, 0.0))


def _nfft(frame_len):
    return 1 << int(np.ceil(np.log2(frame_len)))


def enhance(seg, params=EnhanceParams()):
    """Return a denoised copy of ``seg`` with identical length.

    The noise magnitude spectrum is the mean over the ``noise_init_frames``
    lowest-energy full frames. Each bin's magnitude becomes
    ``max(|X| - oversubtraction * |N|, spectral_floor * |X|)``; phase is kept.
    """
    fs = seg.sample_rate
    x = seg.samples
    L = int(round(params.frame_len_ms * fs / 1000))
    H = int(round(params.hop_ms * fs / 1000))
    n = x.size
    n_full = (n - L) // H + 1 if n >= L else 0
    if n_full < params.noise_init_frames:
        raise SegmentTooShort(
            f"segment of {n} samples has {n_full} full frames; "
            f"{params.noise_init_frames} needed for the noise estimate"
        )

    w = tight_window(L, H)
    nfft = _nfft(L)
    # pad so every input sample sits where the squared windows sum to one
    lead = L
    n_frames = (n + 2 * L - L) // H + 1
    padded = np.zeros((n_frames - 1) * H + L)
    padded[lead:lead + n] = x
    idx = np.arange(L)[None, :] + H * np.arange(n_frames)[:, None]
    frames = padded[idx] * w
    spec = np.fft.rfft(frames, nfft, axis=1)
    mag = np.abs(spec)

    # frames lying entirely inside the original signal
    starts = H * np.arange(n_frames) - lead
    inside = np.flatnonzero((starts >= 0) & (starts + L <= n))
    energy = np.sum(frames[inside] ** 2, axis=1)
    quiet = inside[np.argsort(energy, kind="stable")[: params.noise_init_frames]]
    noise = mag[quiet].mean(axis=0)

    new_mag = np.maximum(mag - params.oversubtraction * noise,
                         params.spectral_floor * mag)
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = np.where(mag > 0, new_mag / mag, 0.0)
    out_frames = np.fft.irfft(spec * gain, nfft, axis=1)[:, :L] * w

    y = np.zeros_like(padded)
    np.add.at(y, idx, out_frames)
    return seg.with_samples(y[lead:lead + n])
