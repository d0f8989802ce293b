"""
Tolerable error rate of alternating B and P steps
=================================================

Iterate the Bell-diagonal recurrences for every state with given bit and
phase error rates and bisect for the largest rate at which all of them
reach a positive one-way yield.
"""

import numpy as np

from twoway_bb84 import belldiag

# one round at 10% independent bit and phase errors
q = belldiag.InitialCondition("independent").states(0.10)[0]
q_b, pass_prob = belldiag.b_step_map(q)
print("B step:", np.round(q_b, 6), "pass", round(float(pass_prob), 4))
print("then P:", np.round(belldiag.p_step_map(q_b), 6))

###############################################################################
# Below the threshold the state converges, above it the yield stalls.
for p in (0.15, 0.25):
    res = belldiag.iterate_schedule(belldiag.InitialCondition("independent").states(p)[0])
    print(f"independent p={p}: {res.verdict} after {res.rounds} rounds")

###############################################################################
# Worst case over q_y, with both marginals equal to p
res = belldiag.find_threshold("alternating", "worst-case")
print(res.report().splitlines()[0])
print("q_y that fails first just above it:", res.worst_q_y)
