"""Smoke test for the `emw` extension module.

Build the module first (see README), then run: python python/smoke_test.py
"""

import json
import math

import emw


def main():
    case = emw.PowerCase.builtin("ieee39")
    assert case.validate() == [], case.validate()

    pf = emw.power_flow(case)
    assert pf.iterations <= 10 and pf.max_mismatch < 1e-8
    assert len(pf.v_mag) == 39

    inertia = emw.distribute_inertia(case)
    assert math.isclose(sum(inertia.j_total), case.total_inertia, rel_tol=1e-9)

    path = emw.shortest_path(case, 39, 31)
    assert path.buses == [39, 9, 8, 7, 6, 31], path.buses

    scenario = emw.builtin_scenario("case39_load_step")
    field = emw.simulate(case, scenario, 39, 31, t_end=3.0)
    assert field.max_abs_chi() > 0.0
    assert len(field.chi) == len(field.times)
    assert len(field.chi[0]) == len(field.xi)
    report = json.loads(field.analyze())
    assert report["propagated"]

    try:
        emw.simulate(case, scenario, 39, 31, courant=1.5)
    except ArithmeticError as err:
        assert "instability" in str(err)
    else:
        raise AssertionError("supercritical run was not rejected")

    two_bus = emw.PowerCase.builtin("two_bus")
    step = emw.builtin_scenario("two_bus_load_step")
    peaks = [
        emw.simulate(two_bus.with_inertia_constant(h), step, 2, 1, t_end=4.0).max_abs_chi()
        for h in (1.5, 3.0, 6.0, 15.0)
    ]
    assert all(b < a for a, b in zip(peaks, peaks[1:])), peaks

    print(f"path {path.buses}, travel {path.travel_time_s:.3f} s")
    print(f"peak |chi| by H: {[f'{p:.4f}' for p in peaks]}")
    print("smoke test ok")


if __name__ == "__main__":
    main()
