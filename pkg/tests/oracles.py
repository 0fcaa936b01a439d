"""Frozen reference values shared by several test modules.

Each Green value was computed once by a bare loop in float64: iterate
``z -> z^2 + c`` from ``z = 0`` until ``|z_n| > 1e100`` and take
``2^-n log|z_n|`` (truncation error below 1e-15).  No package code is used.
"""

G_Z2_PLUS_1_AT_0 = 0.20367726136974001
G_Z2_PLUS_2_AT_0 = 0.4547848050611178
