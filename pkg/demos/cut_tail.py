"""Cut-tail points and what lowering the upper switching bounds does.

Run: python3 demos/cut_tail.py
"""
from pathlib import Path

from multinorm import bisect_sigma, find_t_cut, load_system, simplify_bounds

HERE = Path(__file__).parent / "systems"


def main():
    sys = load_system(HERE / "stable_pair.json")
    for j, A in enumerate(sys.modes):
        r = find_t_cut(A)
        print(f"mode {j + 1}: T_cut = {r.T_cut:.6f} ({r.method})")
    reduced, changes = simplify_bounds(sys, "reduce")
    for c in changes:
        print(f"mode {c.mode + 1}: M {c.old_upper:.4f} -> {c.new_upper:.4f} ({c.action})")
    for label, s in (("original", sys), ("reduced", reduced)):
        res = bisect_sigma(s, target_width=0.02)
        print(f"{label:9s} sigma in [{res.lo:.5f}, {res.hi:.5f}]  {res.verdict}")


if __name__ == "__main__":
    main()
