"""Deterministic desk-scale pick-and-place world and its sensor layer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from .program import (
    AXES, Command, If, Number, Probe, Program, SiteId, Word,
    format_payload, is_numeric_channel,
)

Vec = tuple[float, float, float]

# Translations snap to this many decimals so that sums of decimal deltas stay exact.
GRID_DECIMALS = 9
WINDOWS = ("initial", "final", "whole-run")
FAULT_KINDS = ("negate", "add-noise")


class ScenarioError(ValueError):
    pass


class InfeasibleCommand(RuntimeError):
    pass


class InvalidCommand(RuntimeError):
    pass


class UnknownChannel(InvalidCommand):
    pass


def snap(v: float) -> float:
    return round(v, GRID_DECIMALS) + 0.0


def _vec(value: Any, what: str) -> Vec:
    try:
        x, y, z = (float(c) for c in value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: expected a 3-element position, got {value!r}") from exc
    return (x, y, z)


# ---------------------------------------------------------------- noise and faults


@dataclass(frozen=True)
class NoiseSpec:
    """Truncated Gaussian.  Defaults put mean +/- ~3 sigma on the observed range [0.053, 0.39]."""

    mean: float = 0.2215
    stddev: float = 0.0557
    lo: float = 0.053
    hi: float = 0.39
    sign: str = "positive"  # or "symmetric"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"noise truncation needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.stddev < 0:
            raise ValueError("noise stddev must be >= 0")
        if self.sign not in ("positive", "symmetric"):
            raise ValueError(f"unknown sign mode {self.sign!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(float(d.get("mean", cls.mean)), float(d.get("stddev", cls.stddev)),
                   float(d.get("lo", cls.lo)), float(d.get("hi", cls.hi)), d.get("sign", cls.sign))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stddev": self.stddev, "lo": self.lo, "hi": self.hi, "sign": self.sign}


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, max_tries: int = 100_000) -> float:
    """Draw from N(mean, stddev) rejection-truncated to [lo, hi], then apply the sign mode."""
    if spec.stddev == 0:
        value = spec.mean
    else:
        for _ in range(max_tries):
            value = float(rng.normal(spec.mean, spec.stddev))
            if spec.lo <= value <= spec.hi:
                break
        else:
            raise ValueError(f"rejection sampling failed for {spec}")
    if spec.sign == "symmetric" and rng.random() < 0.5:
        value = -value
    return value


@dataclass(frozen=True)
class SensorFault:
    channel: str
    kind: str  # "negate" | "add-noise"
    window: str = "whole-run"
    noise: Optional[NoiseSpec] = None

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown fault window {self.window!r}")
        if (self.kind == "add-noise") != (self.noise is not None):
            raise ValueError("a noise spec is required for add-noise faults and only for them")
        if not is_numeric_channel(self.channel):
            raise ValueError(f"faults apply to numeric channels only, got {self.channel!r}")

    def active(self, phase: str) -> bool:
        return self.window == "whole-run" or self.window == phase

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"channel": self.channel, "kind": self.kind, "window": self.window}
        if self.noise is not None:
            d["noise"] = self.noise.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SensorFault":
        noise = NoiseSpec.from_dict(d["noise"]) if d.get("noise") is not None else None
        return cls(d["channel"], d["kind"], d.get("window", "whole-run"), noise)

    @classmethod
    def from_spec(cls, text: str, default_noise: NoiseSpec) -> "SensorFault":
        """Parse ``channel:kind[:window]``, e.g. ``box.0.x:negate:initial``."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad fault spec {text!r}; expected channel:kind[:window]")
        kind = {"noise": "add-noise"}.get(parts[1], parts[1])
        window = parts[2] if len(parts) == 3 else "whole-run"
        return cls(parts[0], kind, window, default_noise if kind == "add-noise" else None)


# ---------------------------------------------------------------- scenario


@dataclass(frozen=True)
class Surface:
    name: str
    region: tuple[tuple[float, float], tuple[float, float]]  # (xmin, ymin), (xmax, ymax)
    height: float

    def covers(self, x: float, y: float) -> bool:
        (x0, y0), (x1, y1) = self.region
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class Workspace:
    min: Vec
    max: Vec

    def contains(self, p: Sequence[float]) -> bool:
        return all(lo <= c <= hi for lo, c, hi in zip(self.min, p, self.max))


@dataclass(frozen=True)
class BoxSpec:
    id: int
    color: str
    position: Vec


@dataclass(frozen=True)
class BoxRandomization:
    id: int
    position_jitter: Vec = (0.0, 0.0, 0.0)
    color_choices: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioSpec:
    workspace: Workspace
    robot_position: Vec
    robot_heading: float = 0.0
    robot_gripper: str = "open"
    grasp_radius: float = 0.05
    boxes: tuple[BoxSpec, ...] = ()
    surfaces: tuple[Surface, ...] = ()
    locations: dict[str, Vec] = field(default_factory=dict)
    randomize: tuple[BoxRandomization, ...] = ()
    noise_default: NoiseSpec = NoiseSpec()
    name: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            ws = d["workspace"]
            workspace = Workspace(_vec(ws["min"], "workspace.min"), _vec(ws["max"], "workspace.max"))
            robot = d.get("robot", {})
            boxes = tuple(BoxSpec(int(b["id"]), str(b.get("color", "red")), _vec(b["position"], f"box {b['id']}"))
                          for b in d.get("boxes", []))
            surfaces = tuple(
                Surface(s["name"], ((float(s["region"][0][0]), float(s["region"][0][1])),
                                    (float(s["region"][1][0]), float(s["region"][1][1]))), float(s["height"]))
                for s in d.get("surfaces", []))
            locations = {k: _vec(v, f"location {k}") for k, v in d.get("locations", {}).items()}
            randomize = []
            for r in d.get("randomize", {}).get("boxes", []):
                jitter = r.get("position_jitter", 0.0)
                jitter = (float(jitter),) * 3 if isinstance(jitter, (int, float)) else _vec(jitter, "position_jitter")
                randomize.append(BoxRandomization(int(r["id"]), jitter, tuple(r.get("color_choices", ()))))
            scenario = cls(
                workspace=workspace,
                robot_position=_vec(robot.get("position", (0, 0, 0)), "robot.position"),
                robot_heading=norm_angle(float(robot.get("heading", 0.0))),
                robot_gripper=robot.get("gripper", "open"),
                grasp_radius=float(d.get("grasp_radius", 0.05)),
                boxes=boxes,
                surfaces=surfaces,
                locations=locations,
                randomize=tuple(randomize),
                noise_default=NoiseSpec.from_dict(d.get("noise_default", {})),
                name=d.get("name", ""),
            )
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc!r}") from exc
        scenario.check()
        return scenario

    def check(self) -> None:
        ws = self.workspace
        if not all(lo <= hi for lo, hi in zip(ws.min, ws.max)):
            raise ScenarioError("workspace min must not exceed max")
        if ws.min[2] < 0:
            raise ScenarioError("workspace must not extend below the floor (z < 0)")
        if not ws.contains(self.robot_position):
            raise ScenarioError(f"robot position {self.robot_position} lies outside the workspace")
        if self.robot_gripper not in ("open", "closed"):
            raise ScenarioError(f"robot gripper must be open or closed, got {self.robot_gripper!r}")
        ids = [b.id for b in self.boxes]
        if len(set(ids)) != len(ids):
            raise ScenarioError("box ids must be unique")
        for b in self.boxes:
            if not ws.contains(b.position):
                raise ScenarioError(f"box {b.id} position {b.position} lies outside the workspace")
        for name, pos in self.locations.items():
            if not ws.contains(pos):
                raise ScenarioError(f"location {name!r} lies outside the workspace")
        for r in self.randomize:
            if r.id not in ids:
                raise ScenarioError(f"randomize block names unknown box {r.id}")


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return ScenarioSpec.from_dict(json.load(fh))


# ---------------------------------------------------------------- world state


@dataclass(frozen=True)
class BoxState:
    id: int
    color: str
    position: Vec
    supported_on: str  # surface name, "held" or "floor"


@dataclass(frozen=True)
class Event:
    kind: str  # grasp-on-air | redundant-close | redundant-open | grasp | release
    step: int
    detail: str = ""


@dataclass(frozen=True)
class WorldState:
    effector: Vec
    heading: float
    gripper: str
    held: Optional[int]
    boxes: tuple[BoxState, ...]
    workspace: Workspace
    surfaces: tuple[Surface, ...]
    locations: dict[str, Vec]
    grasp_radius: float
    clock: float = 0.0
    events: tuple[Event, ...] = ()
    phase: str = "initial"  # sensor window: initial -> (grasp) transport -> (release) final
    step: int = 0

    def box(self, box_id: int) -> BoxState:
        for b in self.boxes:
            if b.id == box_id:
                return b
        raise KeyError(box_id)

    def physical_key(self) -> tuple:
        """Ground-truth physical state, ignoring clock-free bookkeeping such as events."""
        return (self.effector, self.heading, self.gripper, self.held,
                tuple((b.id, b.color, b.position, b.supported_on) for b in self.boxes), self.clock)


def _support_under(surfaces: Iterable[Surface], x: float, y: float) -> tuple[str, float]:
    best = ("floor", 0.0)
    for s in surfaces:
        if s.covers(x, y) and s.height >= best[1]:
            best = (s.name, s.height)
    return best


def init_world(scenario: ScenarioSpec, rng: Optional[np.random.Generator] = None) -> WorldState:
    """Build the initial state, applying the scenario's per-box jitter and color draws."""
    jitter = {r.id: r for r in scenario.randomize}
    boxes = []
    for b in scenario.boxes:
        pos, color = b.position, b.color
        r = jitter.get(b.id)
        if r is not None:
            if rng is None:
                raise ScenarioError("scenario has a randomize block; a seeded rng is required")
            offs = [float(rng.uniform(-j, j)) if j > 0 else 0.0 for j in r.position_jitter]
            pos = tuple(snap(c + o) for c, o in zip(pos, offs))  # type: ignore[assignment]
            if r.color_choices:
                color = str(r.color_choices[int(rng.integers(len(r.color_choices)))])
        if not scenario.workspace.contains(pos):
            raise ScenarioError(f"box {b.id} position {pos} lies outside the workspace")
        support, _h = _support_under(scenario.surfaces, pos[0], pos[1])
        boxes.append(BoxState(b.id, color, pos, support))
    return WorldState(
        effector=scenario.robot_position,
        heading=scenario.robot_heading,
        gripper=scenario.robot_gripper,
        held=None,
        boxes=tuple(boxes),
        workspace=scenario.workspace,
        surfaces=scenario.surfaces,
        locations=dict(scenario.locations),
        grasp_radius=scenario.grasp_radius,
    )


# ---------------------------------------------------------------- stepping


def norm_angle(deg: float) -> float:
    """Map to [0, 360); float ``%`` can return 360.0 for tiny negative inputs."""
    a = deg % 360.0
    return 0.0 if a >= 360.0 else a + 0.0


def _cos_sin(deg: float) -> tuple[float, float]:
    deg = norm_angle(deg)
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
    if deg in exact:
        return exact[deg]
    rad = math.radians(deg)
    return math.cos(rad), math.sin(rad)


def _num(cmd: Command, i: int) -> float:
    try:
        arg = cmd.args[i]
    except IndexError:
        raise InvalidCommand(f"{cmd.verb}: missing argument {i}") from None
    if not isinstance(arg, Number):
        raise InvalidCommand(f"{cmd.verb}: argument {i} is not a number")
    return arg.value


def _axis(cmd: Command) -> int:
    arg = cmd.args[0] if cmd.args else None
    if not (isinstance(arg, Word) and arg.text in AXES):
        raise InvalidCommand(f"{cmd.verb}: expected an axis")
    return AXES.index(arg.text)


_ARITY = {"pick": 0, "release": 0, "move": 2, "moveto": 2, "lift": 1, "drop": 1, "turn": 1,
          "turnleft": 1, "turnright": 1, "wait": 1, "goto": 1}


def _with_effector(w: WorldState, pos: Vec, **changes) -> WorldState:
    if not w.workspace.contains(pos) or pos[2] < 0:
        raise InfeasibleCommand(f"effector target {pos} leaves the workspace")
    boxes = w.boxes
    if w.held is not None:
        boxes = tuple(replace(b, position=pos) if b.id == w.held else b for b in boxes)
    return replace(w, effector=pos, boxes=boxes, **changes)


def step_command(w: WorldState, cmd: Command) -> WorldState:
    """Apply one resolved command (probe arguments already evaluated) and return the new state.

    Raises :class:`InfeasibleCommand` when the effector would leave the
    workspace or a box would end below the floor, and :class:`InvalidCommand`
    for unknown verbs or malformed arguments.
    """
    verb = cmd.verb
    if verb not in _ARITY:
        raise InvalidCommand(f"unknown verb {verb!r}")
    if len(cmd.args) != _ARITY[verb]:
        raise InvalidCommand(f"{verb}: expected {_ARITY[verb]} argument(s), got {len(cmd.args)}")
    w = replace(w, step=w.step + 1)
    x, y, z = w.effector

    if verb in ("move", "moveto"):
        axis, v = _axis(cmd), _num(cmd, 1)
        pos = list(w.effector)
        pos[axis] = snap(pos[axis] + v if verb == "move" else v)
        return _with_effector(w, tuple(pos))  # type: ignore[arg-type]
    if verb in ("lift", "drop"):
        d = _num(cmd, 0)
        return _with_effector(w, (x, y, snap(z + d if verb == "lift" else z - d)))
    if verb == "turn":
        theta = norm_angle(_num(cmd, 0))
        c, s = _cos_sin(theta)
        r = math.hypot(x, y)
        return _with_effector(w, (r * c + 0.0, r * s + 0.0, z), heading=theta)
    if verb in ("turnleft", "turnright"):
        theta = _num(cmd, 0) * (1 if verb == "turnleft" else -1)
        c, s = _cos_sin(theta)
        return _with_effector(w, (x * c - y * s + 0.0, x * s + y * c + 0.0, z), heading=norm_angle(w.heading + theta))
    if verb == "wait":
        t = _num(cmd, 0)
        if t < 0:
            raise InvalidCommand("wait: negative duration")
        return replace(w, clock=w.clock + t)
    if verb == "goto":
        name = cmd.args[0]
        if not isinstance(name, Word) or name.text not in w.locations:
            raise InvalidCommand(f"goto: unknown location {getattr(name, 'text', name)!r}")
        return _with_effector(w, w.locations[name.text])
    if verb == "pick":
        if w.gripper == "closed":
            return replace(w, events=w.events + (Event("redundant-close", w.step),))
        best = None
        for b in w.boxes:
            d = math.dist(b.position, w.effector)
            if d <= w.grasp_radius and (best is None or d < best[0]):
                best = (d, b.id)
        if best is None:
            return replace(w, gripper="closed", events=w.events + (Event("grasp-on-air", w.step),))
        boxes = tuple(replace(b, position=w.effector, supported_on="held") if b.id == best[1] else b
                      for b in w.boxes)
        return replace(w, gripper="closed", held=best[1], boxes=boxes, phase="transport",
                       events=w.events + (Event("grasp", w.step, f"box {best[1]}"),))
    # release
    if w.gripper == "open":
        return replace(w, phase="final", events=w.events + (Event("redundant-open", w.step),))
    if w.held is None:
        return replace(w, gripper="open", phase="final")
    support, height = _support_under(w.surfaces, x, y)
    if height < 0:
        raise InfeasibleCommand("box would rest below the floor")
    boxes = tuple(replace(b, position=(x, y, height), supported_on=support) if b.id == w.held else b
                  for b in w.boxes)
    return replace(w, gripper="open", held=None, boxes=boxes, phase="final",
                   events=w.events + (Event("release", w.step, f"box {w.held} on {support}"),))


# ---------------------------------------------------------------- sensors


def _ground_truth(w: WorldState, channel: str) -> Union[float, str]:
    parts = channel.split(".")
    if channel == "color":
        if w.held is not None:
            return w.box(w.held).color
        if not w.boxes:
            raise UnknownChannel("color: no boxes in the world")
        nearest = min(w.boxes, key=lambda b: (math.dist(b.position, w.effector), b.id))
        return nearest.color
    try:
        if parts[0] == "robot" and len(parts) == 2:
            if parts[1] == "angle":
                return w.heading
            return w.effector[AXES.index(parts[1])]
        if parts[0] in ("box", "distance") and len(parts) == 3:
            box = w.box(int(parts[1]))
            i = AXES.index(parts[2])
            if parts[0] == "box":
                return box.position[i]
            return box.position[i] - w.effector[i]
    except (KeyError, ValueError):
        pass
    raise UnknownChannel(f"unknown channel {channel!r}")


def read_sensor(w: WorldState, channel: str, faults: Sequence[SensorFault] = (),
                rng: Optional[np.random.Generator] = None) -> Union[float, str]:
    """Read a channel, then apply matching active faults in declaration order."""
    value = _ground_truth(w, channel)
    for f in faults:
        if f.channel != channel or not f.active(w.phase):
            continue
        if f.kind == "negate":
            value = -value  # type: ignore[operator]
        else:
            if rng is None:
                raise ValueError("add-noise fault needs an rng")
            value = value + sample_noise(f.noise, rng)  # type: ignore[operator, arg-type]
    return value


# ---------------------------------------------------------------- interpreter


@dataclass(frozen=True)
class TraceStep:
    site: Optional[SiteId]
    command: str
    state: WorldState


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    status: str  # completed | invalid-command | infeasible
    error: str = ""
    error_site: Optional[SiteId] = None

    @property
    def initial(self) -> WorldState:
        return self.steps[0].state

    @property
    def final(self) -> WorldState:
        return self.steps[-1].state

    @property
    def events(self) -> tuple[Event, ...]:
        return self.final.events


class _Abort(Exception):
    def __init__(self, status: str, message: str, site: SiteId):
        self.status, self.message, self.site = status, message, site


def _compare(value, cmp: str, literal) -> bool:
    if isinstance(literal, str) != isinstance(value, str):
        raise InvalidCommand(f"cannot compare {value!r} with {literal!r}")
    if cmp == "=":
        return value == literal
    if cmp == "!=":
        return value != literal
    if cmp == "<":
        return value < literal
    return value > literal


class _Interpreter:
    def __init__(self, faults: Sequence[SensorFault], rng: np.random.Generator):
        self.faults = faults
        self.rng = rng
        self.steps: list[TraceStep] = []

    def read(self, w: WorldState, channel: str):
        return read_sensor(w, channel, self.faults, self.rng)

    def resolve(self, w: WorldState, cmd: Command) -> Command:
        args = []
        for a in cmd.args:
            if isinstance(a, Probe):
                v = self.read(w, a.channel)
                if isinstance(v, str):
                    raise InvalidCommand(f"probe {a.channel!r} is not numeric")
                args.append(Number((-v if a.negated else v) + a.offset))
            else:
                args.append(a)
        return Command(cmd.verb, tuple(args))

    def block(self, w: WorldState, stmts, prefix: tuple[int, ...]) -> WorldState:
        for i, stmt in enumerate(stmts):
            path = prefix + (i,)
            site = SiteId(path, "command")
            try:
                if isinstance(stmt, Command):
                    cmd = self.resolve(w, stmt)
                    w = step_command(w, cmd)
                    self.steps.append(TraceStep(site, format_payload(cmd), w))
                elif isinstance(stmt, If):
                    taken = _compare(self.read(w, stmt.channel), stmt.cmp, stmt.literal)
                    w = self.block(w, stmt.then if taken else stmt.orelse, path + (0 if taken else 1,))
                else:
                    for _ in range(stmt.count):
                        w = self.block(w, stmt.body, path + (0,))
            except InfeasibleCommand as exc:
                raise _Abort("infeasible", str(exc), site) from None
            except InvalidCommand as exc:
                raise _Abort("invalid-command", str(exc), site) from None
            for b in w.boxes:
                if b.position[2] < 0:
                    raise _Abort("infeasible", f"box {b.id} below the floor", site)
        return w


def run_program(program: Program, scenario: ScenarioSpec, faults: Sequence[SensorFault] = (),
                seed: int = 0, world_seed: Optional[int] = None) -> Trace:
    """Execute ``program`` in a fresh world and return its trace.

    ``world_seed`` drives environment randomization (defaults to ``seed``);
    ``seed`` drives sensor noise.  Keeping them apart lets every mutant of a
    round share the original's box placement.
    """
    world = init_world(scenario, np.random.default_rng(seed if world_seed is None else world_seed))
    interp = _Interpreter(tuple(faults), np.random.default_rng(seed))
    interp.steps.append(TraceStep(None, "init", world))
    try:
        interp.block(world, program.statements, ())
    except _Abort as abort:
        return Trace(tuple(interp.steps), abort.status, abort.message, abort.site)
    return Trace(tuple(interp.steps), "completed")
