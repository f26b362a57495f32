"""Model-based statistical model checking for MDPs with unknown probabilities."""

from __future__ import annotations

from smcmdp.model import IntervalMdp, Mdp, ModelError, SupportMdp, parse_model, serialize_model

__all__ = [
    "IntervalMdp",
    "Mdp",
    "ModelError",
    "SupportMdp",
    "parse_model",
    "serialize_model",
]

__version__ = "0.1.0"
