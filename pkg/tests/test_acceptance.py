"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import json
import time
from collections import Counter
from dataclasses import replace
from fractions import Fraction

import numpy as np
from hypothesis import given, settings

from helpers import SMALL_SCENARIO, make_scenario
from robomut.cli import main
from robomut.harness import Classification, mutation_score, run_experiment
from robomut.mutation import (CONSTANT_NEGATE, PRESETS, ROTATION_PERTURB, SENSOR_NEGATE, Mutant, MutantCatalog,
                              ProgramEdit, apply_operator, enumerate_sites, generate_catalog, inject_sensor_fault)
from robomut.program import VERBS, Command, Number, SiteId, node_at, replace_node
from robomut.reference import DEFAULT_ROUNDS, DEFAULT_SEED, PROGRAM_PATH, SCENARIO_PATH, SUITE_PATH
from robomut.report import render_scores
from robomut.world import NoiseSpec, init_world, read_sensor, run_program, sample_noise
from strategies import programs, valid_programs
from test_mutation import check_first_order, check_involution, expected_table3
from test_world import check_against_oracle, straight_line

RESULTS: list[str] = []


def record(number, title, ok, detail):
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    print(line)
    RESULTS.append(line)
    assert ok, line


def run_cli(tmp_path, name, *extra):
    report = tmp_path / name
    code = main(["run", str(PROGRAM_PATH), "--scenario", str(SCENARIO_PATH), "--suite", str(SUITE_PATH),
                 "--mutants", str(tmp_path / "cat.json"), "--rounds", str(DEFAULT_ROUNDS),
                 "--seed", str(DEFAULT_SEED), "--report", str(report), *extra])
    assert code == 0
    return report


def mutate_cli(tmp_path):
    return main(["mutate", str(PROGRAM_PATH), "--scenario", str(SCENARIO_PATH), "--ops", "table3",
                 "--out", str(tmp_path / "cat.json")])


def test_1_catalog_reproduction(tmp_path):
    start = time.perf_counter()
    code = mutate_cli(tmp_path)
    elapsed = time.perf_counter() - start
    data = json.loads((tmp_path / "cat.json").read_text())
    rows = [(m["category"], m["description"]) for m in data["mutants"]]
    counts = Counter(c for c, _ in rows)
    ok = (code == 0 and len(rows) == 26 and rows == expected_table3()
          and counts == {"Translation": 3, "Rotation": 2, "Gripper Operation": 3, "Robot Initial Position": 6,
                         "Box Initial Position": 6, "Box Final Position": 6}
          and elapsed < 1.0)
    record(1, "table3 catalog", ok, f"{len(rows)} mutants, rows in order: {rows == expected_table3()}, "
                                    f"{elapsed:.3f}s")


def test_2_score_band(tmp_path):
    assert mutate_cli(tmp_path) == 0
    start = time.perf_counter()
    report = run_cli(tmp_path, "rep.json")
    elapsed = time.perf_counter() - start
    scores = [p["score"] for p in json.loads(report.read_text())["scores"]["perRound"]]
    ok = len(scores) == 5 and all(s is not None and 0.77 <= s <= 0.92 for s in scores) and elapsed < 60
    record(2, "score band [0.77, 0.92]", ok, f"seed {DEFAULT_SEED}, scores {[round(s, 4) for s in scores]}, "
                                           f"{elapsed:.2f}s")


def test_3_determinism(tmp_path):
    assert mutate_cli(tmp_path) == 0
    a = run_cli(tmp_path, "a.json").read_bytes()
    b = run_cli(tmp_path, "b.json").read_bytes()
    c = run_cli(tmp_path, "c.json", "--parallel", "8").read_bytes()
    ok = a == b == c
    record(3, "determinism", ok, f"repeat identical: {a == b}, parallel 8 identical: {a == c}")


def test_4_taxonomy(ref_program, ref_scenario, ref_suite):
    # (a) naive edits that leave the verb vocabulary
    naive = generate_catalog(ref_program, ref_scenario, "naive-string")
    off_vocab = tuple(m for m in naive.mutants
                      if any(isinstance(n, Command) and n.verb not in VERBS
                             for _, n in ((s, node_at(m.payload.program, s))
                                          for s in enumerate_sites(m.payload.program, "command"))))
    res = run_experiment(ref_program, ref_scenario, MutantCatalog(ref_program, off_vocab, "naive-string"), ref_suite)
    classes = {o.classification for r in res.rounds for o in r.outcomes}
    a_ok = bool(off_vocab) and classes == {Classification.INVALID}

    # (b) one-degree perturbation of each turn, with the color forced so the perturbed branch runs
    b_classes = set()
    for site, color in zip(enumerate_sites(ref_program, "absolute-turn"), ("red", "blue")):
        m = replace(apply_operator(ref_program, ROTATION_PERTURB, site), id=1)
        forced = replace(ref_scenario, randomize=tuple(replace(r, color_choices=(color,))
                                                       for r in ref_scenario.randomize))
        res = run_experiment(ref_program, forced, MutantCatalog(ref_program, (m,), "fixture"), ref_suite)
        b_classes |= {o.classification for r in res.rounds for o in r.outcomes}
    b_ok = b_classes == {Classification.SURVIVED}

    # (c) lift delta pushed past the workspace ceiling
    lift = SiteId((3, 0), "argument")
    high = replace_node(ref_program, lift, Number(0.5))
    m = Mutant(1, "lift 0.5", ProgramEdit(lift, CONSTANT_NEGATE, high))
    res = run_experiment(ref_program, ref_scenario, MutantCatalog(ref_program, (m,), "fixture"), ref_suite)
    c_ok = {o.classification for r in res.rounds for o in r.outcomes} == {Classification.INFEASIBLE}

    record(4, "taxonomy", a_ok and b_ok and c_ok,
           f"(a) {len(off_vocab)} off-vocabulary naive mutants all Invalid: {a_ok}; "
           f"(b) +1 degree Survived: {b_ok}; (c) lift past zmax Infeasible: {c_ok}")


def test_5_simulator_oracle():
    rng = np.random.default_rng(20240501)
    scenario = make_scenario(SMALL_SCENARIO, boxes=[])
    infeasible = 0
    failures = 0
    for _ in range(1000):
        commands = []
        for _ in range(int(rng.integers(0, 11))):
            verb = str(rng.choice(["move", "lift", "drop"]))
            if verb == "move":
                commands.append((verb, int(rng.integers(0, 3)), f"{int(rng.integers(-400, 401))}/1000"))
            else:
                commands.append((verb, 2, f"{int(rng.integers(-200, 201))}/1000"))
        try:
            check_against_oracle(commands, scenario)
        except AssertionError:
            failures += 1
        if run_program(straight_line(commands), scenario).status == "infeasible":
            infeasible += 1
    record(5, "simulator vs component-sum oracle", failures == 0,
           f"1000 programs, {failures} mismatches, {infeasible} infeasible aborts checked by index")


def test_6_noise_model():
    rng = np.random.default_rng(7)
    xs = np.array([sample_noise(NoiseSpec(), rng) for _ in range(10_000)])
    ok = xs.min() >= 0.053 and xs.max() <= 0.39 and abs(xs.mean() - 0.2215) <= 0.01
    record(6, "noise model", ok, f"min {xs.min():.4f}, max {xs.max():.4f}, mean {xs.mean():.4f}")


def test_7_operator_algebra():
    scenario = make_scenario(SMALL_SCENARIO)
    checked = Counter()

    @settings(max_examples=150, deadline=None)
    @given(valid_programs)
    def involution(p):
        check_involution(p)
        checked["involution"] += 1

    @settings(max_examples=150, deadline=None)
    @given(programs)
    def first_order(p):
        for preset in PRESETS[1:]:
            check_first_order(p, generate_catalog(p, scenario, preset))
        checked["first-order"] += 1

    @settings(max_examples=150, deadline=None)
    @given(valid_programs)
    def first_order_table3_shaped(p):
        for preset in PRESETS[1:]:
            check_first_order(p, generate_catalog(p, scenario, preset))

    error = None
    try:
        involution()
        first_order()
        first_order_table3_shaped()
        sensor_negate_involution(200)
    except AssertionError as exc:
        error = exc
    record(7, "operator algebra", error is None,
           f"{checked['involution']} involution and {checked['first-order']} first-order program checks, "
           f"sensor negate involution over 200 states" + (f"; {error}" if error else ""))


def sensor_negate_involution(samples):
    from robomut.reference import reference_scenario

    scenario = reference_scenario()
    channels = ["robot.x", "robot.y", "robot.z", "box.0.x", "box.0.y", "box.0.z", "distance.0.y"]
    for seed in range(samples):
        w = init_world(scenario, np.random.default_rng(seed))
        for channel in channels:
            fault = inject_sensor_fault(SENSOR_NEGATE, channel).faults[0]
            assert read_sensor(w, channel, [fault, fault]) == read_sensor(w, channel), (channel, seed)


def test_8_score_arithmetic():
    rng = np.random.default_rng(8)
    kinds = list(Classification)
    mismatches = 0
    for _ in range(500):
        matrix = list(rng.choice(kinds, size=int(rng.integers(0, 40))))
        n = Counter(matrix)
        k, s, inv, inf = (n[Classification.KILLED], n[Classification.SURVIVED], n[Classification.INVALID],
                          n[Classification.INFEASIBLE])
        for a in (False, True):
            for b in (False, True):
                denom = k + s + (inv if a else 0) + (inf if b else 0)
                want = Fraction(k, denom) if denom else None
                got = mutation_score(k, s, inv, inf, include_invalid=a, include_infeasible=b)
                if (got is None) != (want is None) or (got is not None and got != float(want)):
                    mismatches += 1
    table = render_scores([0.92, 0.85, 0.92, 0.88, 0.88])
    table_ok = table == "Round\tScore\n#1\t92%\n#2\t85%\n#3\t92%\n#4\t88%\n#5\t88%\nMean\t89%\n"
    record(8, "score arithmetic", mismatches == 0 and table_ok,
           f"500 synthetic matrices x 4 flag settings, {mismatches} mismatches; reference table renders Mean 89%: {table_ok}")
