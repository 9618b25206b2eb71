"""Python bindings for the acesearcher C++ library."""

from __future__ import annotations

import json
import os
import sys
from typing import Optional, Sequence

from ._core import (
    CoreError,
    Index,
    allocate_budget,
    compute_reward,
    exact_match,
    merge_contexts,
    normalize_answer,
    numeric_match,
    parse_decomposition,
    preferences_from_trees,
    run_cli,
    substitute_placeholders,
    token_f1,
    tokenize,
)

__all__ = [
    "CoreError",
    "Index",
    "allocate_budget",
    "compute_reward",
    "evaluate",
    "exact_match",
    "main",
    "merge_contexts",
    "normalize_answer",
    "numeric_match",
    "parse_decomposition",
    "preferences_from_trees",
    "run_cli",
    "substitute_placeholders",
    "theory_check",
    "token_f1",
    "tokenize",
]


def theory_check(seed: int = 0) -> dict:
    """Run the numerical checks of the KL-regularized objective; returns the report."""
    from ._core import theory_report

    return json.loads(theory_report(seed))


def evaluate(trajectories: str | os.PathLike, dataset: str | os.PathLike, k: Optional[int] = None) -> dict:
    """Score a trajectory file against its dataset."""
    from ._core import evaluate_report

    return json.loads(evaluate_report(os.fspath(trajectories), os.fspath(dataset), k))


def main(argv: Optional[Sequence[str]] = None) -> int:
    status, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return status
