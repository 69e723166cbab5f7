"""Universal adversarial perturbations from top-1 decision feedback.

A single additive perturbation is optimized against a black-box
classifier using only its decisions: two batched queries per update
feed a finite-difference estimate into a zeroth-order optimizer, and
the result fools the model on unseen images.
"""

from .attack import AttackConfig, RunTrace, run_attack
from .data import Dataset, ImageBatch, load_mnist, make_blobs
from .optim import Perturbation
from .victim import QueryOracle, train_victim

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "RunTrace", "run_attack",
    "Dataset", "ImageBatch", "load_mnist", "make_blobs",
    "Perturbation", "QueryOracle", "train_victim",
    "__version__",
]
