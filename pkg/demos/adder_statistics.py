"""Exact and series values of I_k and V_k for the adder-erasure channel.

Run: python demos/adder_statistics.py
"""
from raclab.adder import figure_table

for delta in (0.0, 0.2):
    print(f"delta = {delta}")
    print("   k   I_exact  I_series   V_exact  V_series")
    for k, I, Ia, V, Va in figure_table(delta, 100):
        if k in (1, 2, 5, 10, 20, 50, 100):
            print(f"{k:4d}  {I:8.5f}  {Ia:8.5f}  {V:8.5f}  {Va:8.5f}")
