"""Toolkit for low-resource speaker verification experiments.

Covers corpus manifests, constrained subset construction, verification
trial lists, cosine/EER scoring, learning-rate and freezing schedules,
deterministic sampling plans, AAM-softmax numerics, and a file-protocol
orchestrator for external trainers.
"""

__version__ = "0.1.0"
