"""Per-segment extraction chain (enhance -> VAD -> acoustic + prosodic) and
the run configuration shared by the command line and the experiment scripts."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import acoustic, prosody
from .corpus import CANONICAL_RATE, Category, DataError, Label, cut_segments
from .enhance import EnhanceParams, SegmentTooShort, enhance
from .featurepipe import FeatureMatrix, fuse
from .vad import VadParams, detect

log = logging.getLogger(__name__)

FEATURE_SETS = ("acoustic", "prosodic", "fusion")
DEFAULT_FUSION_K = 251
SET_DIMS = {"acoustic": acoustic.N_FEATURES, "prosodic": prosody.N_FEATURES,
            "fusion": acoustic.N_FEATURES + prosody.N_FEATURES}


@dataclass
class PipelineConfig:
    feature_set: str = "acoustic"
    # None: 251 for fusion, disabled otherwise; 0 disables explicitly
    select_k: int = None
    svm_c: float = 1.0
    n_folds: int = 3
    seed: int = 7
    redundancy_cap: float = 0.9
    enhance: bool = True
    # the likelihood-ratio VAD assumes Gaussian noise, which spectral
    # subtraction residue violates; detect on the unenhanced signal
    vad_on_enhanced: bool = False
    std_ddof: int = 0
    enhance_params: EnhanceParams = field(default_factory=EnhanceParams)
    vad_params: VadParams = field(default_factory=VadParams)
    acoustic_params: acoustic.AcousticParams = field(default_factory=acoustic.AcousticParams)

    def __post_init__(self):
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(f"feature_set must be one of {FEATURE_SETS}")
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.select_k is not None:
            if self.select_k < 0:
                raise ValueError("select_k must be >= 0")
            if self.select_k > SET_DIMS[self.feature_set]:
                raise ValueError(f"select_k {self.select_k} exceeds the "
                                 f"{SET_DIMS[self.feature_set]} {self.feature_set} features")
        if self.svm_c <= 0:
            raise ValueError("svm_c must be positive")

    def effective_select_k(self):
        if self.select_k is None:
            return DEFAULT_FUSION_K if self.feature_set == "fusion" else 0
        return self.select_k

    def echo(self):
        return {"feature_set": self.feature_set, "select_k": self.effective_select_k(),
                "svm_c": self.svm_c, "n_folds": self.n_folds, "seed": self.seed,
                "enhance": self.enhance, "vad_on_enhanced": self.vad_on_enhanced,
                "std_ddof": self.std_ddof,
                "vad_log_threshold": self.vad_params.log_threshold,
                "vad_hangover_frames": self.vad_params.hangover_frames}

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class SegmentFeatures:
    segment_id: str
    subject_id: str
    label: Label
    acoustic: np.ndarray
    prosodic: np.ndarray
    vad: object
    quality: dict = field(default_factory=dict)


def process_segment(seg, config=PipelineConfig()):
    if seg.sample_rate != CANONICAL_RATE:
        raise DataError(f"segment {seg.segment_id!r} is at {seg.sample_rate} Hz, "
                        f"expected {CANONICAL_RATE}")
    if not np.all(np.isfinite(seg.samples)) or seg.samples.size == 0:
        raise DataError(f"segment {seg.segment_id!r} is empty or non-finite")
    quality = {}
    raw = seg
    if config.enhance:
        try:
            seg = enhance(seg, config.enhance_params)
        except SegmentTooShort:
            quality["enhancement_skipped"] = True
    mask = detect(seg if config.vad_on_enhanced else raw, config.vad_params)
    llds = acoustic.extract_llds(seg, mask, config.acoustic_params)
    av = acoustic.acoustic_vector(llds)
    quality.update(av.quality)
    pv = prosody.prosodic_vector(prosody.rhythm_llds(mask))
    return SegmentFeatures(seg.segment_id, seg.subject_id, seg.label, av.values, pv.values,
                           mask, quality)


def extract_segments(segments, config=PipelineConfig(), dump_vad=None):
    """Run the chain over labelled segments; failures are logged and skipped."""
    results, failed = [], []
    for seg in segments:
        try:
            feats = process_segment(seg, config)
        except DataError as exc:
            log.warning("segment %s failed: %s", seg.segment_id, exc)
            failed.append((seg.segment_id, str(exc)))
            continue
        if dump_vad is not None:
            Path(dump_vad).mkdir(parents=True, exist_ok=True)
            feats.vad.dump(Path(dump_vad) / f"{seg.segment_id}.vad")
        results.append(feats)
    if segments and not results:
        raise DataError("every segment failed feature extraction")
    return results, failed


def matrices(results, failed=()):
    """Build the acoustic and prosodic matrices from extraction results."""
    labels = [1 if r.label is Label.DISTRESS else 0 for r in results]
    groups = [r.subject_id for r in results]
    ids = tuple(r.segment_id for r in results)
    ac = FeatureMatrix(np.array([r.acoustic for r in results]).reshape(len(results), -1),
                       acoustic.FEATURE_NAMES, labels, groups, ids)
    pr = FeatureMatrix(np.array([r.prosodic for r in results]).reshape(len(results), -1),
                       prosody.FEATURE_NAMES, labels, groups, ids)
    ac.dropped = list(failed)
    pr.dropped = list(failed)
    return ac, pr


def select_set(ac, pr, feature_set):
    if feature_set == "acoustic":
        return ac
    if feature_set == "prosodic":
        return pr
    fused = fuse(ac, pr)
    fused.dropped = ac.dropped
    return fused


def labelled_segments(manifest):
    segs = cut_segments(manifest, (Category.PATIENT,))
    return [s for s in segs if s.label is not Label.UNLABELED]


def extract_matrix(manifest, config=PipelineConfig()):
    results, failed = extract_segments(labelled_segments(manifest), config)
    ac, pr = matrices(results, failed)
    return select_set(ac, pr, config.feature_set)
