"""Audio ingestion, annotation manifests, segment cutting and the synthetic
call generator that stands in for real telemedicine recordings."""

import csv
import enum
import io
import json
import math
import wave
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

CANONICAL_RATE = 16000


class Category(enum.Enum):
    PATIENT = "Patient"
    DOCTOR = "Doctor"
    SPOKESPERSON = "Spokesperson"
    COUGH = "Cough"
    WHEEZING = "Wheezing"
    BACKGROUND_NOISE = "BackgroundNoise"


class Condition(enum.Enum):
    SEVERE_DISTRESS = "SevereDistress"
    MILD_DISTRESS_ASTHMA = "MildDistressAsthma"
    MILD_DISTRESS = "MildDistress"
    HEALTHY = "Healthy"
    NOT_APPLICABLE = "NotApplicable"


class Label(enum.Enum):
    DISTRESS = "Distress"
    NORMAL = "Normal"
    UNLABELED = "Unlabeled"


DISTRESS_CONDITIONS = frozenset(
    {Condition.SEVERE_DISTRESS, Condition.MILD_DISTRESS_ASTHMA, Condition.MILD_DISTRESS}
)
PATIENT_CONDITIONS = DISTRESS_CONDITIONS | {Condition.HEALTHY}


def label_for(condition):
    """Map a subject condition to the binary class label.

    Severe, mild and asthma-mild distress all pool into Distress.
    """
    if condition in DISTRESS_CONDITIONS:
        return Label.DISTRESS
    if condition is Condition.HEALTHY:
        return Label.NORMAL
    return Label.UNLABELED


class DataError(Exception):
    """Invalid or unreadable input data."""


class AudioError(DataError):
    pass


class UnreadableAudioError(AudioError):
    pass


class UnsupportedEncodingError(AudioError):
    pass


class EmptyAudioError(AudioError):
    pass


class ManifestError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(eq=False)
class AudioSegment:
    samples: np.ndarray
    sample_rate: int
    subject_id: str = ""
    category: Category = Category.PATIENT
    label: Label = Label.UNLABELED
    segment_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def with_samples(self, samples, sample_rate=None):
        return AudioSegment(
            samples,
            self.sample_rate if sample_rate is None else sample_rate,
            self.subject_id,
            self.category,
            self.label,
            self.segment_id,
        )


@dataclass(frozen=True)
class SegmentRecord:
    source_file: str
    start_s: float
    end_s: float
    category: Category
    subject_id: str
    condition: Condition

    @property
    def label(self):
        return label_for(self.condition)

    @property
    def segment_id(self):
        return f"{Path(self.source_file).stem}_{int(round(self.start_s * 1000)):08d}"


@dataclass
class Manifest:
    records: list = field(default_factory=list)
    sample_rate_declared: int = CANONICAL_RATE
    root: Path = field(default=Path("."), compare=False)

    def validate(self):
        conditions = {}
        for i, rec in enumerate(self.records):
            _check_record(rec, line=None)
            prev = conditions.setdefault(rec.subject_id, rec.condition)
            if prev is not rec.condition:
                raise ManifestError(
                    f"subject {rec.subject_id!r} has conflicting conditions "
                    f"{prev.value} and {rec.condition.value}"
                )
        by_key = {}
        for rec in self.records:
            by_key.setdefault((rec.source_file, rec.category), []).append(rec)
        for (src, cat), recs in by_key.items():
            recs = sorted(recs, key=lambda r: (r.start_s, r.end_s))
            for a, b in zip(recs, recs[1:]):
                if b.start_s < a.end_s:
                    raise ManifestError(
                        f"overlapping {cat.value} records in {src}: "
                        f"[{a.start_s}, {a.end_s}] and [{b.start_s}, {b.end_s}]"
                    )
        return self

    def subject_conditions(self, category=Category.PATIENT):
        return {r.subject_id: r.condition for r in self.records if r.category is category}

    def counts(self):
        """Segment counts per category plus the number of patient subjects."""
        out = {c.value: 0 for c in Category}
        for r in self.records:
            out[r.category.value] += 1
        out["subjects"] = len(self.subject_conditions())
        return out

    def resolve(self, source_file):
        p = Path(source_file)
        return p if p.is_absolute() else self.root / p


MANIFEST_HEADER = ("source_file", "start_s", "end_s", "category", "subject_id", "condition")


def _check_record(rec, line):
    if not (0 <= rec.start_s < rec.end_s):
        raise ManifestError(f"bad interval [{rec.start_s}, {rec.end_s}]", line)
    patient = rec.category is Category.PATIENT
    if patient != (rec.condition in PATIENT_CONDITIONS):
        raise ManifestError(
            f"condition {rec.condition.value} is inconsistent with category {rec.category.value}",
            line,
        )


def load_manifest(path, sample_rate_declared=CANONICAL_RATE):
    """Parse and validate a manifest CSV; relative paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ManifestError("missing header", 1) from None
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ManifestError(f"expected header {','.join(MANIFEST_HEADER)}", 1)
    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise ManifestError(f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}", line)
        src, start, end, cat, subj, cond = (c.strip() for c in row)
        try:
            rec = SegmentRecord(src, float(start), float(end), Category(cat), subj, Condition(cond))
        except ValueError as exc:
            raise ManifestError(str(exc), line) from None
        if not math.isfinite(rec.start_s) or not math.isfinite(rec.end_s):
            raise ManifestError("non-finite time", line)
        _check_record(rec, line)
        records.append(rec)
    man = Manifest(records, sample_rate_declared, root=path.parent)
    return man.validate()


def write_manifest(manifest, path):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            w.writerow([r.source_file, f"{r.start_s:.3f}", f"{r.end_s:.3f}",
                        r.category.value, r.subject_id, r.condition.value])
    return path


def load_wav(path):
    """Read a PCM WAV (16-bit or float, mono or stereo) as amplitudes in [-1, 1]."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise UnreadableAudioError(f"{path}: {exc.strerror or exc}") from exc
    if magic not in (b"RIFF", b"RIFX", b"RF64"):
        raise UnreadableAudioError(f"{path}: not a RIFF/WAVE file")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() or "bit" in msg.lower():
            raise UnsupportedEncodingError(f"{path}: {msg}") from exc
        raise UnreadableAudioError(f"{path}: {msg}") from exc
    except OSError as exc:
        raise UnreadableAudioError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample type {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise EmptyAudioError(f"{path}: zero-length audio")
    return AudioSegment(x, int(rate), segment_id=path.stem)


def write_wav(path, samples, sample_rate=CANONICAL_RATE):
    """Write mono 16-bit PCM; amplitudes are clipped to [-1, 1)."""
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def resample(seg, target_rate):
    """Band-limited rate conversion with a Kaiser-windowed sinc filter."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == seg.sample_rate:
        return seg.with_samples(seg.samples.copy())
    ratio = Fraction(int(target_rate), int(seg.sample_rate))
    y = signal.resample_poly(seg.samples, ratio.numerator, ratio.denominator,
                             window=("kaiser", 10.0))
    return seg.with_samples(y, int(target_rate))


def cut_segments(manifest, category_filter=(Category.PATIENT,), target_rate=CANONICAL_RATE):
    """Slice every matching record ``[start_s, end_s)`` out of its source file.

    Sources are resampled to ``target_rate`` before slicing.
    """
    if isinstance(category_filter, Category):
        category_filter = (category_filter,)
    wanted = set(category_filter)
    cache = {}
    out = []
    for rec in manifest.records:
        if rec.category not in wanted:
            continue
        if rec.source_file not in cache:
            src = load_wav(manifest.resolve(rec.source_file))
            if src.sample_rate != target_rate:
                src = resample(src, target_rate)
            cache[rec.source_file] = src.samples
        x = cache[rec.source_file]
        i0 = int(round(rec.start_s * target_rate))
        i1 = int(round(rec.end_s * target_rate))
        if i1 > x.size:
            raise DataError(
                f"record {rec.segment_id} ends at {rec.end_s}s past end of "
                f"{rec.source_file} ({x.size / target_rate:.3f}s)"
            )
        out.append(AudioSegment(x[i0:i1].copy(), target_rate, rec.subject_id,
                                rec.category, rec.label, rec.segment_id))
    return out


# ---------------------------------------------------------------------------
# synthetic corpus


@dataclass
class SynthSpec:
    n_subjects_per_class: int = 10
    segments_per_subject: tuple = (4, 7)
    seed: int = 7
    separation: float = 1.0
    segment_seconds: tuple = (2.0, 3.5)
    # which class cues the separation drives
    cues: tuple = ("pause", "loudness", "jitter")

    def __post_init__(self):
        if not 0.0 <= self.separation <= 1.0:
            raise ValueError("separation must lie in [0, 1]")
        lo, hi = self.segments_per_subject
        if self.n_subjects_per_class < 1 or lo < 1 or hi < lo:
            raise ValueError("subject and segment counts must be >= 1")
        unknown = set(self.cues) - {"pause", "loudness", "jitter"}
        if unknown:
            raise ValueError(f"unknown cues: {sorted(unknown)}")


_FORMANTS = ((730.0, 1090.0, 2440.0), (530.0, 1840.0, 2480.0), (570.0, 840.0, 2410.0),
             (300.0, 2290.0, 3010.0), (640.0, 1190.0, 2390.0))
_BANDWIDTHS = (90.0, 110.0, 170.0)


def _pulse_train(periods, fs):
    """Sawtooth excitation whose k-th cycle lasts ``periods[k]`` samples."""
    edges = np.concatenate([[0.0], np.cumsum(periods)])
    n = int(np.floor(edges[-1]))
    t = np.arange(n, dtype=np.float64)
    k = np.searchsorted(edges, t, side="right") - 1
    phase = (t - edges[k]) / np.asarray(periods)[k]
    return 1.0 - 2.0 * phase, k


def _formant_filter(x, formants, fs):
    y = x
    for f, bw in zip(formants, _BANDWIDTHS):
        r = np.exp(-np.pi * bw / fs)
        a = [1.0, -2.0 * r * np.cos(2 * np.pi * f / fs), r * r]
        y = signal.lfilter([1.0 - r], a, y)
    return y


def _voiced_stretch(rng, n, fs, f0, jitter, am_depth, formants):
    """One voiced stretch of ``n`` samples."""
    periods = []
    total = 0.0
    t0 = fs / f0
    drift = rng.uniform(-0.08, 0.08)
    while total < n + t0:
        frac = total / max(n, 1)
        base = t0 * (1.0 + drift * (frac - 0.5))
        p = base * (1.0 + jitter * rng.standard_normal())
        periods.append(max(p, 0.5 * base))
        total += periods[-1]
    src, _ = _pulse_train(np.array(periods), fs)
    y = _formant_filter(src[:n], formants, fs)
    y /= np.max(np.abs(y)) + 1e-12
    # onset/offset ramps
    ramp = min(n // 4, int(0.02 * fs))
    env = np.ones(n)
    if ramp > 0:
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
    if am_depth > 0:
        f_am = rng.uniform(3.0, 6.0)
        phi = rng.uniform(0, 2 * np.pi)
        t = np.arange(n) / fs
        env *= 1.0 - am_depth * 0.5 * (1.0 + np.sin(2 * np.pi * f_am * t + phi))
    return y * env


def _synth_utterance(rng, dur_s, fs, voice, sep, distress, cues):
    s = sep if distress else 0.0
    pause_scale = 1.0 + 2.0 * s * ("pause" in cues)
    jitter = 0.004 + 0.03 * s * ("jitter" in cues)
    am = 0.7 * s * ("loudness" in cues)
    n_total = int(round(dur_s * fs))
    out = np.zeros(n_total)
    pos = int(rng.uniform(0.1, 0.25) * fs)
    while pos < n_total:
        v_len = int(rng.uniform(0.25, 0.6) * fs)
        v_len = min(v_len, n_total - pos)
        if v_len < int(0.08 * fs):
            break
        formants = tuple(f * voice["formant_scale"]
                         for f in _FORMANTS[rng.integers(len(_FORMANTS))])
        f0 = voice["f0"] * rng.uniform(0.93, 1.07)
        out[pos:pos + v_len] = voice["level"] * _voiced_stretch(
            rng, v_len, fs, f0, jitter, am, formants)
        pos += v_len + int(rng.uniform(0.08, 0.25) * pause_scale * fs)
    return out


def generate_synthetic(spec, out_dir):
    """Write a seeded synthetic corpus (one call WAV per subject) plus
    ``manifest.csv``; return the manifest.

    Each call alternates patient utterances with short doctor turns and is
    mixed with low-level white noise and mains hum. Distress subjects differ
    from healthy ones by longer pauses, amplitude modulation of voiced
    stretches and larger period-to-period perturbation, each scaled by
    ``spec.separation``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fs = CANONICAL_RATE
    rng = np.random.default_rng(spec.seed)
    distress_conditions = (Condition.SEVERE_DISTRESS, Condition.MILD_DISTRESS_ASTHMA,
                           Condition.MILD_DISTRESS, Condition.MILD_DISTRESS)
    subjects = []
    for i in range(spec.n_subjects_per_class):
        subjects.append((f"D{i + 1:03d}", distress_conditions[i % len(distress_conditions)]))
    for i in range(spec.n_subjects_per_class):
        subjects.append((f"N{i + 1:03d}", Condition.HEALTHY))

    records = []
    lo, hi = spec.segments_per_subject
    for subj, cond in subjects:
        distress = cond in DISTRESS_CONDITIONS
        # voice parameters are drawn identically for both classes
        voice = {"f0": rng.uniform(95.0, 150.0),
                 "formant_scale": rng.uniform(0.94, 1.06),
                 "level": rng.uniform(0.25, 0.45)}
        doctor = {"f0": rng.uniform(100.0, 140.0), "formant_scale": 1.0, "level": 0.3}
        n_seg = int(rng.integers(lo, hi + 1))
        parts = [np.zeros(int(0.3 * fs))]
        pos = parts[0].size
        for k in range(n_seg):
            dur = rng.uniform(*spec.segment_seconds)
            utt = _synth_utterance(rng, dur, fs, voice, spec.separation, distress, spec.cues)
            records.append(SegmentRecord(f"{subj}.wav", pos / fs, (pos + utt.size) / fs,
                                         Category.PATIENT, subj, cond))
            parts.append(utt)
            pos += utt.size
            gap = np.zeros(int(rng.uniform(0.2, 0.4) * fs))
            parts.append(gap)
            pos += gap.size
            if k % 2 == 1:
                doc = _synth_utterance(rng, rng.uniform(1.0, 1.5), fs, doctor, 0.0, False, ())
                records.append(SegmentRecord(f"{subj}.wav", pos / fs, (pos + doc.size) / fs,
                                             Category.DOCTOR, f"dr_{subj}",
                                             Condition.NOT_APPLICABLE))
                parts.append(doc)
                pos += doc.size
                gap = np.zeros(int(0.3 * fs))
                parts.append(gap)
                pos += gap.size
        x = np.concatenate(parts)
        t = np.arange(x.size) / fs
        x += 0.003 * rng.standard_normal(x.size) + 0.002 * np.sin(2 * np.pi * 50.0 * t)
        write_wav(out_dir / f"{subj}.wav", x, fs)

    # times are written with millisecond precision; round-trip through text
    # so the returned manifest equals the one on disk
    manifest = Manifest(records, fs, root=out_dir)
    path = write_manifest(manifest, out_dir / "manifest.csv")
    (out_dir / "synth.json").write_text(json.dumps({
        "n_subjects_per_class": spec.n_subjects_per_class,
        "segments_per_subject": list(spec.segments_per_subject),
        "seed": spec.seed,
        "separation": spec.separation,
        "segment_seconds": list(spec.segment_seconds),
        "cues": list(spec.cues),
    }, indent=2) + "\n")
    return load_manifest(path)
