"""Mutation operators, mutant construction and catalog generation."""

from __future__ import annotations

import string
from dataclasses import dataclass, replace
from typing import Any, Optional, Union

from .program import (
    AXES, COMPARATORS, Command, Number, Probe, Program, SiteId, Word,
    channels_read, format_number, format_payload, is_numeric_channel,
    iter_sites, node_at, parse_payload, parse_program, program_hash,
    replace_node, replace_statement, unparse_program,
)
from .world import NoiseSpec, ScenarioSpec, SensorFault, norm_angle, snap

PRESETS = ("table3", "domain-all", "classical", "naive-string")
FAMILIES = ("domain", "classical", "naive-string")


class NotApplicable(ValueError):
    pass


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class MutationOperator:
    id: str
    family: str
    kind: str
    param: Any = None


ROTATION_FLIP = MutationOperator("rotation-flip", "domain", "RotationFlip")
TRANSLATION_SIGN_FLIP = MutationOperator("translation-sign-flip", "domain", "TranslationSignFlip")
BY_TO_ABSOLUTE = MutationOperator("by-to-absolute", "domain", "ByToAbsolute")
COMMAND_DELETE = MutationOperator("command-delete", "domain", "CommandDelete")
COMMAND_DUPLICATE = MutationOperator("command-duplicate", "domain", "CommandDuplicate")
GRIPPER_OPPOSITE = MutationOperator("gripper-opposite", "domain", "GripperOpposite")
SENSOR_NEGATE = MutationOperator("sensor-negate", "domain", "SensorNegate")
SENSOR_NOISE = MutationOperator("sensor-noise", "domain", "SensorNoise")
CONSTANT_NEGATE = MutationOperator("constant-negate", "classical", "ConstantNegate")
# Off by default and never part of a preset: reproduces the one-degree equivalent mutant.
ROTATION_PERTURB = MutationOperator("rotation-perturb", "classical", "RotationPerturb", 1.0)


def ror(comparator: str) -> MutationOperator:
    return MutationOperator(f"ror:{comparator}", "classical", "RORCompare", comparator)


def naive_edit(action: str, index: int) -> MutationOperator:
    return MutationOperator(f"naive:{action}:{index}", "naive-string", "NaiveCharEdit", (action, index))


def operator_from_dict(d: dict) -> MutationOperator:
    param = d.get("param")
    if isinstance(param, list):
        param = tuple(param)
    return MutationOperator(d["operator"], d["family"], d["kind"], param)


@dataclass(frozen=True)
class ProgramEdit:
    site: SiteId
    operator: MutationOperator
    program: Program


@dataclass(frozen=True)
class SensorInjection:
    operator: MutationOperator
    fault: SensorFault


@dataclass(frozen=True)
class Mutant:
    id: int
    description: str
    payload: Union[ProgramEdit, SensorInjection]
    category: str = ""

    @property
    def operator(self) -> MutationOperator:
        return self.payload.operator

    @property
    def faults(self) -> tuple[SensorFault, ...]:
        return (self.payload.fault,) if isinstance(self.payload, SensorInjection) else ()

    def program_for(self, original: Program) -> Program:
        return self.payload.program if isinstance(self.payload, ProgramEdit) else original


@dataclass(frozen=True)
class MutantCatalog:
    original: Program
    mutants: tuple[Mutant, ...]
    preset: str
    scenario_ref: str = ""

    def __len__(self) -> int:
        return len(self.mutants)


# ---------------------------------------------------------------- sites


def translation_axis(cmd: Command) -> Optional[str]:
    """Axis moved by a translation command, or None if ``cmd`` is not one."""
    if cmd.verb in ("lift", "drop") and len(cmd.args) == 1 and isinstance(cmd.args[0], (Number, Probe)):
        return "z"
    if (cmd.verb in ("move", "moveto") and len(cmd.args) == 2 and isinstance(cmd.args[0], Word)
            and cmd.args[0].text in AXES and isinstance(cmd.args[1], (Number, Probe))):
        return cmd.args[0].text
    return None


def _is_rotation(cmd: Command, absolute_only: bool = False) -> bool:
    verbs = ("turn",) if absolute_only else ("turn", "turnleft", "turnright")
    return cmd.verb in verbs and len(cmd.args) == 1 and isinstance(cmd.args[0], Number)


_FILTERS = {
    "rotation": lambda n: isinstance(n, Command) and _is_rotation(n),
    "absolute-turn": lambda n: isinstance(n, Command) and _is_rotation(n, absolute_only=True),
    "translation": lambda n: isinstance(n, Command) and translation_axis(n) is not None,
    "gripper": lambda n: isinstance(n, Command) and n.verb in ("pick", "release") and not n.args,
    "statement": lambda n: True,
}


def enumerate_sites(program: Program, kind: Optional[str] = None) -> list[SiteId]:
    """Sites in document order.

    ``kind`` is either a site kind (``command``, ``condition``, ``argument``)
    or a semantic filter over command sites: ``rotation``, ``absolute-turn``,
    ``translation``, ``gripper``.
    """
    if kind in (None, "condition", "argument"):
        return [s for s, _ in iter_sites(program, kind)]
    if kind == "command":
        kind = "statement"
    pred = _FILTERS[kind]
    return [s for s, n in iter_sites(program, "command") if pred(n)]


# ---------------------------------------------------------------- operators


def _negate_arg(arg):
    if isinstance(arg, Number):
        return Number(-arg.value + 0.0)
    return Probe(arg.channel, -arg.offset + 0.0, not arg.negated)


_SUCC = {}
for _alphabet in (string.ascii_lowercase, string.ascii_uppercase, string.digits):
    for _i, _c in enumerate(_alphabet):
        _SUCC[_c] = _alphabet[(_i + 1) % len(_alphabet)]


def _naive_payload(payload: str, action: str, index: int) -> str:
    if not 0 <= index < len(payload):
        raise NotApplicable(f"no character {index} in {payload!r}")
    if action == "delete":
        return payload[:index] + payload[index + 1:]
    if action == "substitute" and payload[index] in _SUCC:
        return payload[:index] + _SUCC[payload[index]] + payload[index + 1:]
    raise NotApplicable(f"cannot {action} {payload[index]!r}")


def _mutate_node(op: MutationOperator, site: SiteId, node):
    """Return ``(replacement statements or node, before, after)`` or raise NotApplicable."""
    kind = op.kind
    if kind == "RORCompare":
        if site.kind != "condition" or op.param == node.cmp or op.param not in COMPARATORS:
            raise NotApplicable
        return replace(node, cmp=op.param), f"{node.cmp}", f"{op.param}"
    if kind == "ConstantNegate":
        if site.kind != "argument" or not isinstance(node, Number) or node.value == 0:
            raise NotApplicable
        return Number(-node.value), format_number(node.value), format_number(-node.value)
    if site.kind != "command" or not isinstance(node, Command):
        raise NotApplicable
    cmd: Command = node
    before = format_payload(cmd)
    if kind == "RotationFlip":
        if not _is_rotation(cmd):
            raise NotApplicable
        if cmd.verb == "turn":
            theta = cmd.args[0].value  # type: ignore[union-attr]
            new = Command("turn", (Number(norm_angle(snap(360.0 - theta))),))
        else:
            new = Command("turnright" if cmd.verb == "turnleft" else "turnleft", cmd.args)
    elif kind == "RotationPerturb":
        if not _is_rotation(cmd):
            raise NotApplicable
        theta = snap(cmd.args[0].value + float(op.param))  # type: ignore[union-attr]
        new = Command(cmd.verb, (Number(norm_angle(theta) if cmd.verb == "turn" else theta),))
    elif kind == "TranslationSignFlip":
        if translation_axis(cmd) is None:
            raise NotApplicable
        new = Command(cmd.verb, cmd.args[:-1] + (_negate_arg(cmd.args[-1]),))
    elif kind == "ByToAbsolute":
        if cmd.verb != "move" or translation_axis(cmd) is None:
            raise NotApplicable
        new = Command("moveto", cmd.args)
    elif kind == "CommandDelete":
        return (), before, "(nothing)"
    elif kind == "CommandDuplicate":
        return (cmd, cmd), before, f"{before}; {before}"
    elif kind == "GripperOpposite":
        if cmd.verb not in ("pick", "release") or cmd.args:
            raise NotApplicable
        new = Command("release" if cmd.verb == "pick" else "pick")
    elif kind == "NaiveCharEdit":
        action, index = op.param
        new = parse_payload(_naive_payload(before, action, index))
        if new == cmd:
            raise NotApplicable
    else:
        raise NotApplicable(f"{kind} is not a program-edit operator")
    return (new,), before, format_payload(new)


def apply_operator(program: Program, op: MutationOperator, site: SiteId) -> Mutant:
    """Apply one operator at one site; the original program is left untouched.

    Raises :class:`NotApplicable` when the operator does not fit the node.
    """
    try:
        node = node_at(program, site)
    except LookupError as exc:
        raise NotApplicable(f"no node at {site}") from exc
    try:
        result, before, after = _mutate_node(op, site, node)
    except NotApplicable as exc:
        raise NotApplicable(f"{op.kind} does not apply at {site}") from exc
    if isinstance(result, tuple):
        mutated = replace_statement(program, site.path, lambda _s: result)
    else:
        mutated = replace_node(program, site, result)
    if mutated == program:
        raise NotApplicable(f"{op.kind} at {site} leaves the program unchanged")
    desc = f"{op.kind} at {site}: {before} -> {after}"
    return Mutant(0, desc, ProgramEdit(site, op, mutated))


def inject_sensor_fault(op: MutationOperator, channel: str, window: str = "whole-run",
                        noise: Optional[NoiseSpec] = None) -> Mutant:
    if op.kind == "SensorNegate":
        fault = SensorFault(channel, "negate", window)
    elif op.kind == "SensorNoise":
        fault = SensorFault(channel, "add-noise", window, noise or NoiseSpec())
    else:
        raise NotApplicable(f"{op.kind} is not a sensor operator")
    return Mutant(0, f"{op.kind} on {channel} ({window})", SensorInjection(op, fault))


# ---------------------------------------------------------------- catalogs

_SENSOR_CATEGORIES = (
    ("Robot Initial Position", "robot", "initial"),
    ("Box Initial Position", "box", "initial"),
    ("Box Final Position", "box", "final"),
)


def _table3(program: Program, scenario: ScenarioSpec) -> list[Mutant]:
    first_translation: dict[str, SiteId] = {}
    for site in enumerate_sites(program, "translation"):
        axis = translation_axis(node_at(program, site))
        first_translation.setdefault(axis, site)
    missing = [a for a in AXES if a not in first_translation]
    if missing:
        raise CatalogError(f"table3 needs a translation along every axis; missing {', '.join(missing)}")
    turns = enumerate_sites(program, "absolute-turn")
    if len(turns) < 2:
        raise CatalogError(f"table3 needs at least 2 absolute turns, found {len(turns)}")
    picks = [s for s in enumerate_sites(program, "gripper") if node_at(program, s).verb == "pick"]
    if not picks:
        raise CatalogError("table3 needs a pick command")
    if not scenario.boxes:
        raise CatalogError("table3 needs a box in the scenario")

    def edit(op, site, category, description):
        try:
            m = apply_operator(program, op, site)
        except NotApplicable as exc:
            raise CatalogError(f"table3: {exc}") from exc
        return replace(m, description=description, category=category)

    rows = [
        edit(TRANSLATION_SIGN_FLIP, first_translation["y"], "Translation", "Change the y-value in translation"),
        edit(ROTATION_FLIP, turns[0], "Rotation", "Change the angle orientation in rotation"),
        edit(TRANSLATION_SIGN_FLIP, first_translation["z"], "Translation", "Change the z-value in translation"),
        edit(COMMAND_DELETE, picks[0], "Gripper Operation", "Do not change gripper status"),
        edit(COMMAND_DUPLICATE, picks[0], "Gripper Operation", "Change gripper status twice"),
        edit(GRIPPER_OPPOSITE, picks[0], "Gripper Operation",
             "Change gripper status with the opposite expected operation"),
    ]
    rows += [edit(ROTATION_FLIP, t, "Rotation", "Change angle orientation in rotation") for t in turns[1:]]
    rows.append(edit(TRANSLATION_SIGN_FLIP, first_translation["x"], "Translation", "Change x-value in translation"))

    box = f"box.{scenario.boxes[0].id}"
    for category, subject, window in _SENSOR_CATEGORIES:
        prefix = "robot" if subject == "robot" else box
        for op, template in ((SENSOR_NEGATE, "Sensor reading with opposite expected value for {}-component"),
                             (SENSOR_NOISE, "Sensor reading with noise in {}-component")):
            for axis in AXES:
                m = inject_sensor_fault(op, f"{prefix}.{axis}", window, scenario.noise_default)
                rows.append(replace(m, description=template.format(axis), category=category))
    return rows


def _sites_with(program: Program, ops, kind: str) -> list[Mutant]:
    out = []
    for site in enumerate_sites(program, kind):
        for op in ops:
            try:
                out.append(apply_operator(program, op, site))
            except NotApplicable:
                pass
    return out


def _domain_all(program: Program, scenario: ScenarioSpec) -> list[Mutant]:
    ops = (ROTATION_FLIP, TRANSLATION_SIGN_FLIP, BY_TO_ABSOLUTE, COMMAND_DELETE, COMMAND_DUPLICATE, GRIPPER_OPPOSITE)
    out = _sites_with(program, ops, "command")
    for channel in channels_read(program):
        if is_numeric_channel(channel):
            for op in (SENSOR_NEGATE, SENSOR_NOISE):
                out.append(inject_sensor_fault(op, channel, "whole-run", scenario.noise_default))
    return out


def _classical(program: Program) -> list[Mutant]:
    out = []
    for site, node in iter_sites(program):
        if site.kind == "condition":
            out += [apply_operator(program, ror(c), site) for c in COMPARATORS if c != node.cmp]
        elif site.kind == "argument" and isinstance(node, Number) and node.value != 0:
            out.append(apply_operator(program, CONSTANT_NEGATE, site))
    return out


def _naive(program: Program) -> list[Mutant]:
    out = []
    for site in enumerate_sites(program, "command"):
        cmd = node_at(program, site)
        if not isinstance(cmd, Command):
            continue
        seen: set[Program] = set()
        for i in range(len(format_payload(cmd))):
            for action in ("delete", "substitute"):
                try:
                    m = apply_operator(program, naive_edit(action, i), site)
                except NotApplicable:
                    continue
                if m.payload.program not in seen:
                    seen.add(m.payload.program)
                    out.append(m)
    return out


def generate_catalog(program: Program, scenario: ScenarioSpec, preset: str, scenario_ref: str = "") -> MutantCatalog:
    """Build a deterministic catalog; ids run from 1 in generation order."""
    if preset == "table3":
        mutants = _table3(program, scenario)
    elif preset == "domain-all":
        mutants = _domain_all(program, scenario)
    elif preset == "classical":
        mutants = _classical(program)
    elif preset == "naive-string":
        mutants = _naive(program)
    else:
        raise CatalogError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    numbered = tuple(replace(m, id=i) for i, m in enumerate(mutants, start=1))
    return MutantCatalog(program, numbered, preset, scenario_ref)


# ---------------------------------------------------------------- serialization


def catalog_to_dict(catalog: MutantCatalog) -> dict:
    entries = []
    for m in catalog.mutants:
        op = m.operator
        entry: dict[str, Any] = {
            "id": m.id,
            "family": op.family,
            "kind": op.kind,
            "operator": op.id,
            "category": m.category,
            "description": m.description,
        }
        if op.param is not None:
            entry["param"] = list(op.param) if isinstance(op.param, tuple) else op.param
        if isinstance(m.payload, ProgramEdit):
            entry["site_path"] = list(m.payload.site.path)
            entry["site_kind"] = m.payload.site.kind
            entry["mutated_source"] = unparse_program(m.payload.program)
        else:
            entry["site_path"] = None
            entry["fault"] = m.payload.fault.to_dict()
        entries.append(entry)
    return {
        "preset": catalog.preset,
        "scenario_ref": catalog.scenario_ref,
        "original_hash": program_hash(catalog.original),
        "mutants": entries,
    }


def catalog_from_dict(data: dict, original: Program) -> MutantCatalog:
    """Rebuild a catalog; raises :class:`CatalogError` if it was made for another program."""
    if data.get("original_hash") != program_hash(original):
        raise CatalogError("catalog was generated for a different program (hash mismatch)")
    mutants = []
    for e in data["mutants"]:
        op = operator_from_dict(e)
        if "fault" in e:
            payload: Union[ProgramEdit, SensorInjection] = SensorInjection(op, SensorFault.from_dict(e["fault"]))
        else:
            site = SiteId(tuple(e["site_path"]), e.get("site_kind", "command"))
            payload = ProgramEdit(site, op, parse_program(e["mutated_source"]))
        mutants.append(Mutant(int(e["id"]), e.get("description", ""), payload, e.get("category", "")))
    return MutantCatalog(original, tuple(mutants), data.get("preset", ""), data.get("scenario_ref", ""))
