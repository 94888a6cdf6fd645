"""Dental landmark evaluation: matching, metrics, ranking and tooling.

The heavy lifting happens in the compiled ``_core`` extension; this package
re-exports it and adds a few conveniences for working with directories.
"""

from pathlib import Path

from . import _core
from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir(_core) if not name.startswith("_")] + ["evaluate_dirs", "load_dir"]


def load_dir(path, predictions=False):
    """Read every ``*.json`` landmark file in a directory, sorted by name."""
    reader = _core.read_predictions_file if predictions else _core.read_ground_truth_file
    return [reader(str(p)) for p in sorted(Path(path).glob("*.json"))]


def evaluate_dirs(gt_dir, pred_dir, **options):
    """Evaluate a prediction directory against a ground-truth directory."""
    return _core.evaluate(load_dir(gt_dir), load_dir(pred_dir, predictions=True), **options)
