"""Toy reference trainer speaking the tinyvox run-config/report protocol.

The trainer consumes a run-config JSON and an output directory, trains a
small linear embedding model on synthetic, linearly separable features,
and writes ``report.json`` plus an embeddings file.  It talks to the
tinyvox toolkit only through its command line and file formats.
"""

from .features import FEATURE_DIM, FeatureParams, read_manifest_csv, utterance_feature
from .model import AdamState, ToyModel, aam_loss_and_grads

__all__ = [
    "FEATURE_DIM",
    "FeatureParams",
    "read_manifest_csv",
    "utterance_feature",
    "AdamState",
    "ToyModel",
    "aam_loss_and_grads",
]
