"""
Coset reconciliation with the Steane pair
=========================================

C1 is the [7,4] Hamming code and C2 its [7,3] even subcode. Alice announces
u + v for a random codeword u, Bob decodes, and both keep the coset of C2.
"""

import itertools

import numpy as np

from twoway_bb84 import gf2codes

pair = gf2codes.steane_pair()
print(gf2codes.format_code(pair.c1))

rng = np.random.default_rng(0)
v = rng.integers(0, 2, 7, dtype=np.uint8)
for pos in range(-1, 7):
    w = v.copy()
    if pos >= 0:
        w[pos] ^= 1
    a, b, ann = gf2codes.one_way_reconcile(pair, v, w, rng)
    print(f"error at {pos:2d}: announce {ann} keys {a} {b}")

###############################################################################
# Two errors exceed what the code corrects, and the keys can differ
bad = 0
for i, j in itertools.combinations(range(7), 2):
    w = v.copy()
    w[[i, j]] ^= 1
    a, b, _ = gf2codes.one_way_reconcile(pair, v, w, rng)
    bad += not np.array_equal(a, b)
print(bad, "of 21 double errors give different keys")
