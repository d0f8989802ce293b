"""
Searching over B/P step orders
==============================

Every length-L sequence of B and P steps is evaluated at once by walking the
binary tree of prefixes, then bisecting on whether any sequence succeeds.
"""

from twoway_bb84 import belldiag

for length in (2, 4, 8, 12):
    res = belldiag.schedule_search(length)
    print(f"L={length:2d} best {res.sequence:<12s} threshold {res.threshold:.4f}")

print("alternating:", round(res.alternating_threshold, 4))

###############################################################################
# The winner front-loads B steps. Compare a few hand-written orders.
for seq in ("BPBPBPBPBPBP", "BBPPBBPPBBPP", "BBBPPPPPPPPP", res.sequence):
    print(seq, round(belldiag.find_threshold(seq).threshold, 4))
