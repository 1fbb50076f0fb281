"""Learning stack for palpation press datasets.

Consumes datasets produced by the palpation simulator purely through their
on-disk formats (press recordings, class images, the manifest) and emits
prediction stacks in the same image format, so the simulator's scoring
tools can read them back. Nothing in here imports the simulator.
"""

from .errors import FormatError, TrainingDivergedError

__version__ = "0.1.0"

__all__ = ["FormatError", "TrainingDivergedError", "__version__"]
