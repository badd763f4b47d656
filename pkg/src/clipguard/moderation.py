"""Turn class probabilities into a child-safety moderation verdict."""

from dataclasses import dataclass

import numpy as np

from .dataset import Label
from .errors import DomainError
from .model import validate_probabilities


@dataclass(frozen=True)
class ModerationVerdict:
    label: Label
    probabilities: tuple
    flagged: bool
    threshold: float

    def to_json(self):
        return {
            "label": self.label.key,
            "probabilities": [float(p) for p in self.probabilities],
            "flagged": self.flagged,
            "threshold": self.threshold,
        }


def moderate(probabilities, threshold=0.5):
    """Flag unless Safe is the top class and P(Safe) >= ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise DomainError(f"threshold must lie in [0, 1], got {threshold}")
    probs = validate_probabilities(probabilities)
    label = Label(int(np.argmax(probs)))
    flagged = label != Label.SAFE or probs[Label.SAFE] < threshold
    return ModerationVerdict(label, tuple(float(p) for p in probs), bool(flagged), float(threshold))
