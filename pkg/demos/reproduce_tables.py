"""Certified intervals for the two-dimensional reference systems.

Run: python3 demos/reproduce_tables.py
"""
import time
from pathlib import Path

from multinorm import EngineConfig, FiniteSwitchingLaw, bisect_sigma, law_lower_bound, load_system

HERE = Path(__file__).parent / "systems"

CASES = [
    ("table1.json", 0.005, FiniteSwitchingLaw(((0, 1.0), (1, 2.0)))),
    ("table2.json", 0.005, None),
    ("example1.json", 0.02, FiniteSwitchingLaw(((0, 1.0), (1, 2.0)))),
    ("example2_scalar.json", 0.02, FiniteSwitchingLaw(((0, 2.0), (1, 1.0)))),
]


def main():
    for name, width, law in CASES:
        sys = load_system(HERE / name)
        t = time.perf_counter()
        res = bisect_sigma(sys, EngineConfig(N=10), target_width=width)
        elapsed = time.perf_counter() - t
        rep = res.upper_report
        counts = rep.vertex_counts if rep is not None else ()
        print(f"{name:22s} sigma in [{res.lo:.6f}, {res.hi:.6f}]  width {res.width:.5f}  "
              f"{res.verdict:8s} len P {counts}  {elapsed:.1f} s")
        if law is not None:
            print(f"{'':22s} periodic law {law.legs}: lower bound {law_lower_bound(law, sys):.6f}")


if __name__ == "__main__":
    main()
