"""Causal analysis of code-generation prompts.

Quantifies prompts into linguistic features, measures generated-code
quality, learns a tiered causal graph (meta-prompt -> linguistic ->
metric), estimates treatment effects via double machine learning, and
searches intention combinations with a causal-surrogate genetic
algorithm.
"""

__version__ = "0.1.0"

from promptcausal.dataset import (
    ObservationMatrix,
    PromptRecord,
    VariableSchema,
    load_dataset,
    save_dataset,
)
from promptcausal.graph import CausalGraph, Edge
from promptcausal.inference import AteEstimate, estimate_ate
from promptcausal.intentions import Intention, IntentionVector, default_registry

__all__ = [
    "AteEstimate",
    "CausalGraph",
    "Edge",
    "Intention",
    "IntentionVector",
    "ObservationMatrix",
    "PromptRecord",
    "VariableSchema",
    "default_registry",
    "estimate_ate",
    "load_dataset",
    "save_dataset",
    "__version__",
]
