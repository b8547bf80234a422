"""Experiment reports: JSON emission and the per-round score table."""

from __future__ import annotations

import hashlib
import json
import math
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence, Union

from . import __version__
from .harness import ExperimentResult


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Union[str, Path]) -> str:
    return sha256_bytes(Path(path).read_bytes())


def build_report(result: ExperimentResult, inputs: dict[str, str]) -> dict:
    """Report body.  ``inputs`` maps program/scenario/catalog/suite to content hashes.

    There is no timestamp: identical inputs give an identical body.
    """
    rounds = []
    events: dict[str, list[str]] = {}
    for rr in result.rounds:
        mutants = []
        for o in rr.outcomes:
            mutants.append({"id": o.mutant_id, "seed": o.seed, "classification": o.classification.value,
                            "status": o.status, "failedTests": list(o.failed_tests)})
            if o.events:
                seen = events.setdefault(str(o.mutant_id), [])
                for kind in o.events:
                    if kind not in seen:
                        seen.append(kind)
        rounds.append({"round": rr.round, "seed": rr.seed, "mutants": mutants})
    s = result.scores
    scores = {
        "perRound": [{"round": p.round, "seed": p.seed, "killed": p.killed, "survived": p.survived,
                      "invalid": p.invalid, "infeasible": p.infeasible, "score": p.score} for p in s.per_round],
        "mean": s.mean,
        "min": s.min,
        "max": s.max,
        "probableEquivalents": list(s.probable_equivalents),
    }
    return {
        "toolVersion": __version__,
        "inputs": dict(sorted(inputs.items())),
        "config": {"rounds": len(result.rounds), "masterSeed": result.master_seed,
                   "includeInvalid": result.include_invalid, "includeInfeasible": result.include_infeasible},
        "rounds": rounds,
        "scores": scores,
        "events": {k: events[k] for k in sorted(events, key=int)},
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def emit_report(report: dict, path: Union[str, Path]) -> None:
    """Write the report as UTF-8 JSON.  OSError propagates to the caller."""
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def load_report(path: Union[str, Path]) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def percent(score: Optional[float]) -> str:
    if score is None:
        return "n/a"
    # half-up on the decimal repr so 0.875 renders as 88% regardless of binary rounding
    value = (Decimal(repr(score)) * 100).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return f"{value}%"


def render_scores(scores: Sequence[Optional[float]]) -> str:
    """Round/score table with a trailing mean row, e.g. ``#1\\t92%`` ... ``Mean\\t89%``."""
    lines = ["Round\tScore"]
    for i, s in enumerate(scores, 1):
        lines.append(f"#{i}\t{percent(s)}")
    defined = [s for s in scores if s is not None]
    mean = math.fsum(defined) / len(defined) if defined else None
    lines.append(f"Mean\t{percent(mean)}")
    return "\n".join(lines) + "\n"


def report_scores(report: dict) -> list[Optional[float]]:
    return [p["score"] for p in report["scores"]["perRound"]]
