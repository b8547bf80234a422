import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import SORTER
from robomut.program import (
    Command,
    If,
    Number,
    ParseError,
    Probe,
    Program,
    Repeat,
    SiteId,
    Word,
    channels_read,
    iter_sites,
    node_at,
    parse_payload,
    parse_program,
    program_hash,
    unparse_program,
    validate_program,
)
from strategies import programs


def test_sorter_parses_to_expected_shape():
    p = parse_program(SORTER)
    # 4 commands and 1 conditional at top level; 6 commands in total
    assert len(p.statements) == 5
    assert [type(s).__name__ for s in p.statements] == ["Command", "Command", "If", "Command", "Command"]
    assert len(list(iter_sites(p, "command"))) == 7  # 6 commands + the If statement itself
    cond = p.statements[2]
    assert cond == If("color", "=", "red", (Command("turn", (Number(90),)),), (Command("turn", (Number(270),)),))


def test_sorter_is_valid():
    assert validate_program(parse_program(SORTER)) == []


def test_sorter_roundtrip_is_byte_identical():
    assert unparse_program(parse_program(SORTER)) == SORTER


def test_empty_document():
    assert parse_program("") == Program(())
    assert parse_program("  # only a comment\n\n") == Program(())
    assert unparse_program(Program(())) == ""


def test_pic_parses_and_is_flagged_only_by_validation():
    p = parse_program('send("pic")')
    assert p.statements == (Command("pic", ()),)
    violations = validate_program(p)
    assert len(violations) == 1
    assert violations[0].code == "UnknownVerb"
    assert violations[0].site == SiteId((0,), "command")
    assert 'send("pic")' in unparse_program(p)


def test_repeat_zero_is_one_violation():
    p = parse_program('repeat 0 do\n  send("pick")\nend\n')
    assert p.statements[0] == Repeat(0, (Command("pick", ()),))
    violations = validate_program(p)
    assert [v.code for v in violations] == ["RepeatCount"]


@pytest.mark.parametrize("source, code", [
    ('send("pick/1")', "Arity"),
    ('send("move/q/1")', "BadArgument"),
    ('send("lift/@nothing")', "UnknownChannel"),
    ('send("turn/-90")', "NegativeValue"),
    ('if read("color") = 3 then\nend', "LiteralKind"),
    ('if read("box.0.x") > "red" then\nend', "LiteralKind"),
    ('if read("speed") > 1 then\nend', "UnknownChannel"),
    ('send("lift/@color")', "BadArgument"),
])
def test_validation_codes(source, code):
    assert [v.code for v in validate_program(parse_program(source))] == [code]


def test_validation_with_scenario_checks_boxes_and_locations(ref_scenario):
    p = parse_program('send("goto/nowhere")\nsend("moveto/x/@box.7.x")\nsend("goto/home")')
    codes = [v.code for v in validate_program(p, ref_scenario)]
    assert codes == ["UnknownLocation", "UnknownChannel"]
    assert validate_program(p) == []


def test_payload_parts():
    cmd = parse_payload("moveto/x/-@box.0.x+0.5")
    assert cmd == Command("moveto", (Word("x"), Probe("box.0.x", 0.5, True)))
    assert parse_payload("lift/@robot.z-1e-3").args == (Probe("robot.z", -0.001),)
    assert parse_payload("pick").args == ()
    assert parse_payload("").verb == ""


@pytest.mark.parametrize("source, line, col", [
    ('if read("color") = "red" then\n  send("pick")\n', 3, 1),
    ('send("pick")\nrepeat 1x2 do\nend', 2, 8),
    ('send("pick)', 1, 6),
    ('send("pick")\nend', 2, 1),
    ('send("pick") $', 1, 14),
    ('repeat 1.5 do\nend', 1, 8),
    ('if read("color") ~ "red" then\nend', 1, 18),
])
def test_parse_errors_have_positions(source, line, col):
    with pytest.raises(ParseError) as err:
        parse_program(source)
    assert (err.value.line, err.value.column) == (line, col)


def test_comments_and_else_branches():
    p = parse_program('repeat 2 do # twice\n  send("wait/1")\nend\nif read("robot.z") < 0.1 then\nend\n')
    assert p.statements == (Repeat(2, (Command("wait", (Number(1),)),)), If("robot.z", "<", 0.1, (), ()))


def test_channels_read(ref_program):
    assert channels_read(ref_program) == ["box.0.x", "box.0.y", "color"]


def test_program_hash_is_stable_across_formatting():
    a = parse_program('send("lift/0.10")\n')
    b = parse_program('   send("lift/0.1")   # same\n')
    assert program_hash(a) == program_hash(b)


@given(programs)
def test_roundtrip(p):
    text = unparse_program(p)
    again = parse_program(text)
    assert again == p
    assert unparse_program(again) == text


def _count_expected_sites(stmts):
    n = 0
    for s in stmts:
        n += 1
        if isinstance(s, Command):
            n += sum(isinstance(a, (Number, Probe)) for a in s.args)
        elif isinstance(s, If):
            n += 1 + _count_expected_sites(s.then) + _count_expected_sites(s.orelse)
        else:
            n += _count_expected_sites(s.body)
    return n


@given(programs)
def test_site_totality(p):
    sites = list(iter_sites(p))
    assert len(sites) == _count_expected_sites(p.statements)
    assert len({s for s, _ in sites}) == len(sites)
    for site, node in sites:
        assert node_at(p, site) is node


@given(programs)
def test_sites_stable_across_reparse(p):
    again = parse_program(unparse_program(p))
    assert [s for s, _ in iter_sites(p)] == [s for s, _ in iter_sites(again)]


@given(st.sampled_from(["command", "condition", "argument"]), st.lists(st.integers(0, 9), min_size=1, max_size=5))
def test_siteid_text_roundtrip(kind, path):
    site = SiteId(tuple(path), kind)
    assert SiteId.parse(str(site)) == site


def test_node_at_rejects_dangling_sites(ref_program):
    with pytest.raises(LookupError):
        node_at(ref_program, SiteId((40,), "command"))
    with pytest.raises(LookupError):
        node_at(ref_program, SiteId((0,), "condition"))
    with pytest.raises(LookupError):
        node_at(ref_program, SiteId((0, 0), "argument"))  # the axis word is not a site
