#!/usr/bin/env python3
"""Independent amortization / rounding oracle for the car-loan fixture.

Values are produced with plain IEEE-754 doubles in the same operation order
as the sheet formulas (interest = start * rate; end = start + interest - 5000),
and committed as carloan.expected.json. ROUND cases use the decimal module
on the shortest round-trip representation (half away from zero).
"""
import json
from decimal import Decimal, ROUND_HALF_UP

PRINCIPAL = 25000.0
PAYMENT = 5000.0


def table(rates, clamp_last=True):
    rows = []
    start = PRINCIPAL
    for i, rate in enumerate(rates):
        interest = start * rate
        end = start + interest - PAYMENT
        if clamp_last and i == len(rates) - 1:
            end = max(end, 0.0)
        rows.append({"year": i + 1, "start": start, "interest": interest, "end": end})
        start = end
    return rows


def ddround(x, n):
    q = Decimal(1).scaleb(-n)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


expected = {
    "base": table([0.035] * 8),
    "c6_only_5pct": table([0.035] * 4 + [0.05] + [0.035] * 3),
    "c6_outward_5pct": table([0.035] * 4 + [0.05] * 4),
    "row6_deleted": table([0.035] * 7),
    "extended_one_year": None,
    "truncated_last_year": table([0.035] * 8)[:7],
}
# extension by one period keeps the clamped formula in both of the last two rows
ext = table([0.035] * 9)
prev = table([0.035] * 8)
ext[7] = dict(prev[7])
start = ext[7]["end"]
interest = start * 0.035
ext[8] = {"year": 9, "start": start, "interest": interest, "end": max(start + interest - PAYMENT, 0.0)}
expected["extended_one_year"] = ext

round_cases = []
for x, n in [(2.675, 2), (1.005, 2), (-2.5, 0), (2.5, 0), (0.125, 2), (1234.5678, -2),
             (-1.005, 2), (0.0, 3), (1e-7, 5), (123.456, 1), (99.995, 2), (-0.5, 0)]:
    round_cases.append({"x": x, "digits": n, "expected": ddround(x, n)})
expected["round"] = round_cases

with open("carloan.expected.json", "w") as f:
    json.dump(expected, f, indent=2)
    f.write("\n")
