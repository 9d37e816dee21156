import numpy as np
import pytest

from respdistress.corpus import (CANONICAL_RATE, AudioSegment, Category, Condition, Manifest,
                                 SegmentRecord, SynthSpec, generate_synthetic)
from respdistress.pipeline import extract_segments, labelled_segments, matrices

FS = CANONICAL_RATE

# lines emitted by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def sawtooth(f0, seconds, fs=FS, amp=0.5):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * (2.0 * ((t * f0) % 1.0) - 1.0)


def segment(x, fs=FS, **kw):
    return AudioSegment(np.asarray(x, dtype=np.float64), fs, **kw)


def table_manifest():
    """A manifest shaped like the clinical corpus: 88 subjects, 1957 segments."""
    groups = [(5, 65, Condition.SEVERE_DISTRESS), (5, 216, Condition.MILD_DISTRESS_ASTHMA),
              (26, 673, Condition.MILD_DISTRESS), (52, 1003, Condition.HEALTHY)]
    records = []
    rng = np.random.default_rng(0)
    for n_subj, n_seg, cond in groups:
        per = np.full(n_subj, n_seg // n_subj)
        per[: n_seg % n_subj] += 1
        per = rng.permutation(per)
        for s, k in enumerate(per):
            subj = f"{cond.value}{s:02d}"
            for j in range(k):
                records.append(SegmentRecord(f"{subj}.wav", 2.0 * j, 2.0 * j + 1.5,
                                             Category.PATIENT, subj, cond))
    return Manifest(records)


class Corpus:
    """A generated corpus with its extracted feature matrices."""

    def __init__(self, root, spec):
        self.root = root
        self.spec = spec
        self.manifest = generate_synthetic(spec, root)
        results, failed = extract_segments(labelled_segments(self.manifest))
        self.results = results
        self.acoustic, self.prosodic = matrices(results, failed)


@pytest.fixture(scope="session")
def corpus_sep1(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth_sep1")
    return Corpus(root, SynthSpec(10, seed=7, separation=1.0))


@pytest.fixture(scope="session")
def corpus_sep0(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth_sep0")
    return Corpus(root, SynthSpec(10, seed=7, separation=0.0))


@pytest.fixture(scope="session")
def corpus_small(tmp_path_factory):
    """Six subjects, two segments each: fast enough for CLI round trips."""
    root = tmp_path_factory.mktemp("synth_small")
    return generate_synthetic(SynthSpec(3, (2, 2), seed=3), root), root
