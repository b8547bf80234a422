"""Test suites, assertion evaluation, mutant classification and mutation scores."""

from __future__ import annotations

import json
import math
import re
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from .mutation import Mutant, MutantCatalog
from .program import AXES, Program, validate_program
from .world import ScenarioSpec, SensorFault, Trace, WorldState, read_sensor, run_program

MASK64 = (1 << 64) - 1


class HarnessError(RuntimeError):
    """The experiment is misconfigured, e.g. the original program fails its own suite."""


class SuiteError(ValueError):
    pass


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_EVALUATED = "not-evaluated"


class Classification(str, Enum):
    KILLED = "killed"
    SURVIVED = "survived"
    INVALID = "invalid"
    INFEASIBLE = "infeasible"


# ---------------------------------------------------------------- seeds


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, round_index: int, mutant_id: int) -> int:
    """64-bit seed for one (round, mutant) execution.

    Chains the SplitMix64 finalizer: ``h = f(f(f(master) ^ round) ^ mutant)``.
    The finalizer is a bijection on 64-bit words, so for fixed master and
    round, distinct mutant ids always give distinct seeds.
    """
    h = _splitmix64(master_seed & MASK64)
    h = _splitmix64(h ^ (round_index & MASK64))
    return _splitmix64(h ^ (mutant_id & MASK64))


# ---------------------------------------------------------------- suites


@dataclass(frozen=True)
class Within:
    subject: str
    target: Union[str, tuple[float, ...], float]
    tol: tuple[float, ...]


@dataclass(frozen=True)
class Bound:
    subject: str
    op: str  # "ge" | "le"
    bound: Union[str, float]


@dataclass(frozen=True)
class Equals:
    subject: str
    value: Any


Assertion = Union[Within, Bound, Equals]


@dataclass(frozen=True)
class TestCase:
    """One check on a trace.

    ``source`` selects how the *subject* is observed: ``sensed`` reads numeric
    channels through the (possibly faulty) sensor layer, ``true`` reads ground
    truth.  Targets and bounds are always ground truth or literals.
    """

    __test__ = False

    name: str
    when: str  # initial | final | always
    assertion: Assertion
    source: str = "true"

    def __post_init__(self):
        if self.when not in ("initial", "final", "always"):
            raise SuiteError(f"{self.name}: 'when' must be initial, final or always")
        if self.source not in ("sensed", "true"):
            raise SuiteError(f"{self.name}: 'source' must be sensed or true")


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    tests: tuple[TestCase, ...]
    rounds: int = 5
    master_seed: int = 42

    def __post_init__(self):
        names = [t.name for t in self.tests]
        if len(set(names)) != len(names):
            raise SuiteError("test names must be unique")
        if self.rounds < 1:
            raise SuiteError("rounds must be positive")


def _assertion_from_dict(name: str, d: dict) -> Assertion:
    if len(d) != 1:
        raise SuiteError(f"{name}: assert needs exactly one of within, ge, le, equals")
    (kind, body), = d.items()
    if kind == "within":
        tol = body["tol"]
        tol = (float(tol),) if isinstance(tol, (int, float)) else tuple(float(t) for t in tol)
        target = body["target"]
        if isinstance(target, list):
            target = tuple(float(t) for t in target)
        return Within(body["subject"], target, tol)
    if kind in ("ge", "le"):
        return Bound(body["subject"], kind, body["bound"])
    if kind == "equals":
        return Equals(body["subject"], body["value"])
    raise SuiteError(f"{name}: unknown assertion {kind!r}")


def suite_from_dict(data: dict) -> TestSuite:
    try:
        tests = tuple(
            TestCase(t["name"], t.get("when", "final"), _assertion_from_dict(t["name"], t["assert"]),
                     t.get("source", "true"))
            for t in data.get("tests", []))
        return TestSuite(tests, int(data.get("rounds", 5)), int(data.get("master_seed", 42)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SuiteError):
            raise
        raise SuiteError(f"malformed suite: {exc!r}") from exc


def load_suite(path: Union[str, Path]) -> TestSuite:
    with open(path, encoding="utf-8") as fh:
        return suite_from_dict(json.load(fh))


# ---------------------------------------------------------------- state paths

_INTERP = re.compile(r"\$\{([^}]+)\}")


class _Observer:
    """Resolves state paths against one world snapshot."""

    def __init__(self, w: WorldState, sensed: bool, faults: Sequence[SensorFault], rng):
        self.w, self.sensed, self.faults, self.rng = w, sensed, faults, rng

    def channel(self, ch: str) -> float:
        if self.sensed:
            return float(read_sensor(self.w, ch, self.faults, self.rng))
        return float(read_sensor(self.w, ch))

    def get(self, path: str):
        w = self.w
        parts = path.split(".")
        head = parts[0]
        if head in ("robot", "box") and (len(parts) == 1 or (head == "box" and len(parts) == 2)):
            prefix = path
            return tuple(self.channel(f"{prefix}.{a}") for a in AXES)
        if head == "box" and len(parts) == 3 and parts[2] in ("color", "surface"):
            box = w.box(int(parts[1]))
            return box.color if parts[2] == "color" else box.supported_on
        if head in ("robot", "box", "distance"):
            return self.channel(path)
        if path == "gripper":
            return w.gripper
        if path == "held":
            return "none" if w.held is None else w.held
        if path == "clock":
            return w.clock
        if head == "locations" and len(parts) == 2:
            return w.locations[parts[1]]
        raise KeyError(path)


def _interpolate(value, truth: _Observer):
    if isinstance(value, str):
        return _INTERP.sub(lambda m: str(truth.get(m.group(1))), value)
    return value


def _reference(value, truth: _Observer):
    """Literal, or a state path (optionally with ``${...}`` parts) resolved against ground truth."""
    value = _interpolate(value, truth)
    if isinstance(value, str):
        return truth.get(value)
    return value


def _check(test: TestCase, w: WorldState, faults: Sequence[SensorFault], rng) -> bool:
    truth = _Observer(w, False, (), None)
    subj = _Observer(w, test.source == "sensed", faults, rng)
    a = test.assertion
    if isinstance(a, Within):
        got = subj.get(a.subject)
        want = _reference(a.target, truth)
        got_v = got if isinstance(got, tuple) else (got,)
        want_v = want if isinstance(want, tuple) else (want,)
        tol = a.tol * len(got_v) if len(a.tol) == 1 else a.tol
        if not len(got_v) == len(want_v) == len(tol):
            raise SuiteError(f"{test.name}: dimension mismatch between subject, target and tolerance")
        return all(abs(g - t) <= e for g, t, e in zip(got_v, want_v, tol))
    if isinstance(a, Bound):
        got = subj.get(a.subject)
        bound = float(_reference(a.bound, truth))
        return got >= bound if a.op == "ge" else got <= bound
    got = subj.get(a.subject)
    want = _interpolate(a.value, truth)
    if isinstance(got, (int, float)) and isinstance(want, (int, float)):
        return float(got) == float(want)
    return str(got) == str(want)


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False

    name: str
    verdict: Verdict
    step: Optional[int] = None  # first violating trace step for failures


def _test_rng(seed: int, name: str) -> np.random.Generator:
    # one stream per test so adding a test never perturbs the others' draws
    return np.random.default_rng([seed & MASK64, zlib.crc32(name.encode("utf-8"))])


def evaluate_assertions(tests: Sequence[TestCase], trace: Trace,
                        faults: Sequence[SensorFault] = (), seed: int = 0) -> dict[str, TestVerdict]:
    """One verdict per test.  ``always`` tests fail at their first violating step."""
    out: dict[str, TestVerdict] = {}
    if trace.status != "completed":
        return {t.name: TestVerdict(t.name, Verdict.NOT_EVALUATED) for t in tests}
    for t in tests:
        rng = _test_rng(seed, t.name)
        if t.when == "initial":
            indices = [0]
        elif t.when == "final":
            indices = [len(trace.steps) - 1]
        else:
            indices = list(range(len(trace.steps)))
        verdict = TestVerdict(t.name, Verdict.PASS)
        for i in indices:
            if not _check(t, trace.steps[i].state, faults, rng):
                verdict = TestVerdict(t.name, Verdict.FAIL, i)
                break
        out[t.name] = verdict
    return out


# ---------------------------------------------------------------- classification


def classify_mutant(original_passed: bool, trace: Optional[Trace], verdicts: dict[str, TestVerdict],
                    violations: Sequence = ()) -> Classification:
    """Invalid > Infeasible > Killed > Survived.

    ``trace`` may be None when validation already rejected the mutant.
    """
    if not original_passed:
        raise HarnessError("the original program fails its own suite; mutant verdicts are meaningless")
    if violations or (trace is not None and trace.status == "invalid-command"):
        return Classification.INVALID
    if trace is None:
        raise HarnessError("a valid mutant needs a trace")
    if trace.status == "infeasible":
        return Classification.INFEASIBLE
    if any(v.verdict == Verdict.FAIL for v in verdicts.values()):
        return Classification.KILLED
    return Classification.SURVIVED


def mutation_score(killed: int, survived: int, invalid: int = 0, infeasible: int = 0,
                   include_invalid: bool = False, include_infeasible: bool = False) -> Optional[float]:
    """killed / considered, or None when nothing is considered."""
    denom = killed + survived
    if include_invalid:
        denom += invalid
    if include_infeasible:
        denom += infeasible
    return killed / denom if denom else None


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class MutantOutcome:
    mutant_id: int
    seed: int
    classification: Classification
    status: str
    failed_tests: tuple[str, ...] = ()
    events: tuple[str, ...] = ()
    detail: str = ""
    final_key: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RoundScore:
    round: int
    seed: int
    killed: int
    survived: int
    invalid: int
    infeasible: int
    score: Optional[float]


@dataclass(frozen=True)
class ScoreReport:
    per_round: tuple[RoundScore, ...]
    mean: Optional[float]
    min: Optional[float]
    max: Optional[float]
    probable_equivalents: tuple[int, ...]


@dataclass(frozen=True)
class RoundResult:
    round: int
    seed: int
    outcomes: tuple[MutantOutcome, ...]


@dataclass(frozen=True)
class ExperimentResult:
    rounds: tuple[RoundResult, ...]
    scores: ScoreReport
    master_seed: int
    include_invalid: bool = False
    include_infeasible: bool = False

    def kill_matrix(self) -> dict[int, list[Classification]]:
        """mutant id -> classification per round."""
        matrix: dict[int, list[Classification]] = {}
        for rnd in self.rounds:
            for o in rnd.outcomes:
                matrix.setdefault(o.mutant_id, []).append(o.classification)
        return matrix


def _run_original(program: Program, scenario: ScenarioSpec, tests: Sequence[TestCase], world_seed: int):
    violations = validate_program(program, scenario)
    if violations:
        raise HarnessError("original program is invalid: " + "; ".join(v.message for v in violations))
    trace = run_program(program, scenario, (), seed=world_seed, world_seed=world_seed)
    if trace.status != "completed":
        raise HarnessError(f"original program did not complete: {trace.status} ({trace.error})")
    verdicts = evaluate_assertions(tests, trace, (), world_seed)
    failed = [n for n, v in verdicts.items() if v.verdict != Verdict.PASS]
    if failed:
        raise HarnessError(f"original program fails its suite: {', '.join(failed)}")
    return trace


def execute_mutant(original: Program, scenario: ScenarioSpec, mutant: Mutant, tests: Sequence[TestCase],
                   seed: int, world_seed: int) -> MutantOutcome:
    """Run one mutant in one round and classify it (the original is assumed to pass)."""
    program = mutant.program_for(original)
    violations = validate_program(program, scenario)
    if violations:
        return MutantOutcome(mutant.id, seed, Classification.INVALID, "rejected",
                             detail="; ".join(f"{v.site}: {v.message}" for v in violations))
    trace = run_program(program, scenario, mutant.faults, seed=seed, world_seed=world_seed)
    verdicts = evaluate_assertions(tests, trace, mutant.faults, seed)
    cls = classify_mutant(True, trace, verdicts)
    failed = tuple(n for n, v in verdicts.items() if v.verdict == Verdict.FAIL)
    events = tuple(e.kind for e in trace.events if e.kind in ("grasp-on-air", "redundant-open", "redundant-close"))
    return MutantOutcome(mutant.id, seed, cls, trace.status, failed, events, trace.error,
                         trace.final.physical_key())


def _mean(xs: list[float]) -> Optional[float]:
    return math.fsum(xs) / len(xs) if xs else None


def run_experiment(program: Program, scenario: ScenarioSpec, catalog: MutantCatalog, suite: TestSuite, *,
                   rounds: Optional[int] = None, master_seed: Optional[int] = None, parallel: int = 1,
                   include_invalid: bool = False, include_infeasible: bool = False) -> ExperimentResult:
    """Run the original (as a gate) and every mutant over seeded rounds.

    Round ``r`` draws its environment from ``derive_seed(master, r, 0)``;
    mutant ``i`` draws sensor noise from ``derive_seed(master, r, i)``.
    Results do not depend on ``parallel``.
    """
    rounds = suite.rounds if rounds is None else rounds
    master = suite.master_seed if master_seed is None else master_seed
    tests = suite.tests

    world_seeds = [derive_seed(master, r, 0) for r in range(1, rounds + 1)]
    originals = [_run_original(program, scenario, tests, ws) for ws in world_seeds]

    jobs = [(r, m, derive_seed(master, r, m.id), world_seeds[r - 1])
            for r in range(1, rounds + 1) for m in catalog.mutants]

    def job(args):
        _r, m, seed, ws = args
        return execute_mutant(program, scenario, m, tests, seed, ws)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(job, jobs))
    else:
        outcomes = [job(j) for j in jobs]

    n = len(catalog.mutants)
    round_results = tuple(
        RoundResult(r, world_seeds[r - 1], tuple(outcomes[(r - 1) * n:r * n])) for r in range(1, rounds + 1))

    per_round = []
    for rr in round_results:
        counts = {c: 0 for c in Classification}
        for o in rr.outcomes:
            counts[o.classification] += 1
        k, s, inv, inf = (counts[Classification.KILLED], counts[Classification.SURVIVED],
                          counts[Classification.INVALID], counts[Classification.INFEASIBLE])
        per_round.append(RoundScore(rr.round, rr.seed, k, s, inv, inf,
                                    mutation_score(k, s, inv, inf, include_invalid, include_infeasible)))

    equivalents = []
    for idx, m in enumerate(catalog.mutants):
        rows = [rr.outcomes[idx] for rr in round_results]
        if all(o.classification == Classification.SURVIVED for o in rows) and all(
                o.final_key == orig.final.physical_key() for o, orig in zip(rows, originals)):
            equivalents.append(m.id)

    defined = [p.score for p in per_round if p.score is not None]
    scores = ScoreReport(tuple(per_round), _mean(defined), min(defined, default=None),
                         max(defined, default=None), tuple(equivalents))
    return ExperimentResult(round_results, scores, master, include_invalid, include_infeasible)
