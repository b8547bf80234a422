"""Shared sample programs and scenarios."""

import copy

from robomut.world import ScenarioSpec

SORTER = """\
send("pick")
send("lift/5")
if read("color") = "red" then
  send("turn/90")
else
  send("turn/270")
end
send("drop/5")
send("release")
"""

# large-scale world for the sorter's lift by 5
SORTER_SCENARIO = {
    "workspace": {"min": [-20, -20, 0], "max": [20, 20, 20]},
    "robot": {"position": [10, 0, 1]},
    "grasp_radius": 0.5,
    "boxes": [{"id": 0, "color": "red", "position": [10, 0, 1]}],
}

SMALL_SCENARIO = {
    "workspace": {"min": [-0.8, -0.8, 0.0], "max": [0.8, 0.8, 0.5]},
    "robot": {"position": [0.3, 0.2, 0.06]},
    "grasp_radius": 0.05,
    "boxes": [{"id": 0, "color": "red", "position": [0.1, 0.0, 0.02]}],
    "locations": {"home": [0.3, 0.2, 0.06]},
}


def make_scenario(base: dict, **changes) -> ScenarioSpec:
    d = copy.deepcopy(base)
    d.update(changes)
    return ScenarioSpec.from_dict(d)

