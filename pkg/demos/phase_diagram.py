"""Critical curves alpha_-(theta), alpha_+(theta), alpha_m(theta) for k=2, q=5, written to CSV.

Usage: python3 demos/phase_diagram.py [out.csv]
"""

import sys

import numpy as np

from pottstree.cli import _csv_text, curve_rows
from pottstree.homogeneous import critical_constants, curves

k, q = 2, 5
cc = critical_constants(k, q)
print(f"theta_c = {cc.theta_c:.6f}, theta_m = {[round(t, 6) for t in cc.theta_m]}")
print(f"alpha_+ vanishes at {cc.theta_0_plus}, alpha_- at {cc.theta_0_minus}")

cs = curves(k, q, np.linspace(4.47, 10.0, 200))
header, rows = curve_rows(cs)
out = sys.argv[1] if len(sys.argv) > 1 else "curves_k2_q5.csv"
with open(out, "w") as fh:
    fh.write(_csv_text(header, rows))
print(f"wrote {len(rows)} rows to {out}")
