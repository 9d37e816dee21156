"""Respiratory-distress detection from conversational speech: enhancement,
statistical VAD, acoustic and rhythm features, correlation-based selection,
linear SVM and patient-independent cross-validation."""

__version__ = "0.1.0"
