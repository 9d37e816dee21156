"""Speaking-rhythm descriptors from the VAD mask and the 84-dimensional
prosodic vector."""

from dataclasses import dataclass

import numpy as np

from .functionals import FUNCTIONALS, apply_functionals

RHYTHM_LLDS = ("voice_rate", "voice_duration", "pause_duration", "voice_pause_ratio")
RATIO_CAP = 100.0

FEATURE_NAMES = tuple(f"{lld}_{f}" for lld in RHYTHM_LLDS for f in FUNCTIONALS)
SOURCE_LLD = {f"{lld}_{f}": lld for lld in RHYTHM_LLDS for f in FUNCTIONALS}
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 84


@dataclass
class RhythmSeries:
    voice_rate: np.ndarray
    voice_duration: np.ndarray
    pause_duration: np.ndarray
    voice_pause_ratio: np.ndarray
    window_s: float = 1.0
    hop_s: float = 0.25

    def __len__(self):
        return self.voice_rate.size

    def column(self, name):
        return getattr(self, name)


@dataclass
class ProsodicVector:
    values: np.ndarray
    names: tuple = FEATURE_NAMES


def _run_lengths(window):
    """Lengths (frames) of the voiced and unvoiced runs inside ``window``."""
    d = np.flatnonzero(np.diff(window.astype(np.int8))) + 1
    bounds = np.concatenate([[0], d, [window.size]])
    lengths = np.diff(bounds)
    values = window[bounds[:-1]]
    return lengths[values], lengths[~values]


def window_stats(window, frame_s):
    """Rhythm values of one window; runs are clipped at the window edges.

    A window without any voicing has no pauses either (silence is not a pause
    between speech), so every value is 0.
    """
    voiced, pauses = _run_lengths(np.asarray(window, dtype=bool))
    if voiced.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    dur = window.size * frame_s
    n_v = voiced.sum()
    n_p = pauses.sum()
    rate = voiced.size / dur
    vdur = voiced.mean() * frame_s
    pdur = pauses.mean() * frame_s if pauses.size else 0.0
    if n_p == 0:
        ratio = RATIO_CAP
    else:
        ratio = min(n_v / n_p, RATIO_CAP)
    return rate, vdur, pdur, ratio


def rhythm_llds(mask, window_s=1.0, hop_s=0.25, frame_s=None):
    """Slide a ``window_s`` window over the mask in ``hop_s`` steps.

    A mask shorter than one window yields a single window over the whole mask.
    """
    frames = np.asarray(getattr(mask, "frames", mask), dtype=bool)
    if frame_s is None:
        frame_s = getattr(mask, "hop_s", 0.010)
    if frames.size == 0:
        raise ValueError("empty VAD mask")
    win = int(round(window_s / frame_s))
    hop = int(round(hop_s / frame_s))
    if frames.size < win:
        starts = [0]
        win = frames.size
    else:
        starts = range(0, frames.size - win + 1, hop)
    rows = np.array([window_stats(frames[s:s + win], frame_s) for s in starts])
    return RhythmSeries(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], window_s, hop_s)


def prosodic_vector(series):
    if len(series) == 0:
        raise ValueError("rhythm series has no windows")
    values = np.concatenate([apply_functionals(series.column(n)) for n in RHYTHM_LLDS])
    return ProsodicVector(values)
