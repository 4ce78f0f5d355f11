"""Smoke test for the loadsmith Python extension.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/loadsmith-*.whl
    python python/smoke_test.py
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import loadsmith

DELIVERY = """
name: Bracket Loads
version: 1
units: {force: "klbf", moment: "klbf·in"}
coordinate_system: "engine_cs"
load_cases:
  - id: 1
    point_loads:
      left: {fx: 10.0, fy: 1.0, fz: 0.0, mx: 0.0, my: 0.0, mz: 0.0}
      right: {fx: -10.0, fy: -1.0, fz: 0.0, mx: 0.0, my: 0.0, mz: 0.0}
  - id: 2
    point_loads:
      left: {fx: -5.0, fy: 2.0, fz: 0.0, mx: 0.0, my: 0.0, mz: 0.0}
      right: {fx: 5.0, fy: -2.0, fz: 0.0, mx: 0.0, my: 0.0, mz: 0.0}
"""


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    d = loadsmith.Delivery.parse(DELIVERY)
    check(d.case_ids == [1, 2] and d.point_names == ["left", "right"], "parse YAML")
    check(loadsmith.Delivery.parse(d.to_json()) == d, "JSON round trip")
    check(d.validate()["ok"], "validate")

    renamed, count = d.rename_points({"left": "port", "right": "starboard"})
    check(count == 4 and renamed.point_names == ["port", "starboard"], "rename count")

    si = renamed.scale_component("FX", 1.04).convert_units("N,N·m")
    check(si.units == ("N", "N·m"), "convert units")
    expected = 10.0 * 1.04 * 4448.2216152605
    check(math.isclose(si.value(1, "port", "FX"), expected, rel_tol=1e-12), "klbf to N")

    check(si.check_equilibrium()["all_balanced"], "equilibrium")
    check(si.envelope_select() == [1, 2], "envelope selection")

    env = si.envelope()
    check(env.cell("port", "FX")["max_case"] == 1, "envelope cell")
    check(loadsmith.Envelope.from_json(env.to_json()).to_json() == env.to_json(), "extremes round trip")
    report = env.compare(env)
    check(report["new_exceeds_old"] is False, "reflexive compare")
    widened = si.apply_ultimate_factor(1.5).envelope()
    check(widened.compare(env)["new_exceeds_old"] is True, "widened envelope exceeds")

    nodes = {"port": 1004, "starboard": 1005}
    deck = si.ansys_deck(1, nodes, exclude=["starboard"])
    check(deck.splitlines()[2] == "F,1004,FX,4.626150E+04", "deck line")
    with tempfile.TemporaryDirectory() as tmp:
        paths = si.export_ansys([1, 2], nodes, tmp)
        check([Path(p).name for p in paths] == ["limit_load_1.inp", "limit_load_2.inp"], "export files")

    check(loadsmith.min_k_for(0.9, 0.05) == 29, "min_k_for")
    check(loadsmith.pass_lower_bound(29, 0.05) >= 0.9, "pass_lower_bound")

    fx = loadsmith.generate_fixture(42, 100, ["a", "b", "c"], 6)
    check(len(fx.envelope_select()) == 6, "fixture critical count")

    try:
        loadsmith.Delivery.parse('{"name": "x"}')
    except loadsmith.LoadsmithError as e:
        check("version" in str(e) or "load_cases" in str(e), "errors raise LoadsmithError")
    else:
        check(False, "errors raise LoadsmithError")

    print(json.dumps({"smoke_test": "passed"}))


if __name__ == "__main__":
    main()
