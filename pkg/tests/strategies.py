"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from robomut.program import COMPARATORS, VERBS, Command, If, Number, Probe, Program, Repeat, Word

IDENT = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True)
CHANNELS = ["color", "robot.x", "robot.y", "robot.z", "robot.angle", "box.0.x", "box.0.y", "box.0.z",
            "distance.0.x", "distance.0.z"]
FLOATS = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
THOUSANDTHS = st.integers(-400, 400).map(lambda k: k / 1000)

numbers = FLOATS.map(Number)
probes = st.builds(Probe, st.sampled_from(CHANNELS[1:]), FLOATS, st.booleans())
words = IDENT.map(Word)
args = st.one_of(numbers, probes, words)
commands = st.builds(Command, st.one_of(st.sampled_from(sorted(VERBS)), IDENT),
                     st.lists(args, max_size=3).map(tuple))


def _compound(children):
    block = st.lists(children, max_size=3).map(tuple)
    ifs = st.builds(If, st.sampled_from(CHANNELS), st.sampled_from(COMPARATORS),
                    st.one_of(IDENT, FLOATS), block, block)
    repeats = st.builds(Repeat, st.integers(0, 5), block)
    return st.one_of(ifs, repeats)


statements = st.recursive(commands, _compound, max_leaves=12)
programs = st.lists(statements, max_size=6).map(lambda s: Program(tuple(s)))


# structurally valid programs whose commands all take numeric-only arguments
def _translation(verb_axis):
    verb, axis = verb_axis
    if verb in ("move", "moveto"):
        return THOUSANDTHS.map(lambda v: Command(verb, (Word(axis), Number(v))))
    return THOUSANDTHS.map(lambda v: Command(verb, (Number(v),)))


valid_commands = st.one_of(
    st.sampled_from([("move", "x"), ("move", "y"), ("move", "z"), ("moveto", "x"), ("moveto", "y"),
                     ("lift", ""), ("drop", "")]).flatmap(_translation),
    st.sampled_from(["pick", "release"]).map(lambda v: Command(v, ())),
    st.sampled_from(["turn", "turnleft", "turnright"]).flatmap(
        lambda v: st.sampled_from([0, 45, 90, 180, 270, 30.5]).map(lambda a: Command(v, (Number(a),)))),
)


def _valid_compound(children):
    block = st.lists(children, min_size=1, max_size=3).map(tuple)
    ifs = st.builds(If, st.just("color"), st.sampled_from(["=", "!="]), st.sampled_from(["red", "blue"]),
                    block, block)
    repeats = st.builds(Repeat, st.integers(1, 3), block)
    return st.one_of(ifs, repeats)


valid_statements = st.recursive(valid_commands, _valid_compound, max_leaves=8)
valid_programs = st.lists(valid_statements, min_size=1, max_size=6).map(lambda s: Program(tuple(s)))
