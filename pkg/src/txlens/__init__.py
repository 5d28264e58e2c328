"""Evidence-based explainability workbench for credit transaction
classification: ingest, feature store, PNN classifier, evaluation metrics,
permutation importance, what-if probing, evidence queries, and an HTTP API.
"""

from .labels import CLASS_ORDER, N_CLASSES, ClassLabel

__version__ = "0.1.0"

__all__ = ["CLASS_ORDER", "N_CLASSES", "ClassLabel", "__version__"]
