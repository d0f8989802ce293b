"""
Where the qubits go
===================

Without sifting every position is usable, at the price of 2n/r pre-shared
secret bits. The standard BB84 baseline keeps half.
"""

from twoway_bb84 import belldiag
from twoway_bb84.channel import PauliChannel
from twoway_bb84.session import SessionParams, run_session

for r in (4, 16, 64):
    out = run_session(SessionParams(n=1024, r=r, seed=3))
    ours = belldiag.key_rate_accounting(out, "no_pab")
    base = belldiag.key_rate_accounting(out, "standard_bb84")
    print(f"r={r:3d} key {ours.final_key_bits:g} consumed {ours.consumed_secret_bits} "
          f"net {ours.net_secret_bits:g}  (sifted baseline key {base.final_key_bits:g})")

###############################################################################
# Noise eats into the key through distillation
out = run_session(SessionParams(n=8192, r=64, channel=PauliChannel.depolarizing(0.12), seed=3))
for k, v in belldiag.key_rate_accounting(out).as_rows():
    print(f"{k:>22s} {v}")

###############################################################################
# Eve's information on an m-bit key for a few security parameters
for s in (20, 30, 40):
    c, bound = belldiag.eve_info_bound(s, 100)
    print(f"s={s} c={c:.3f} bound={bound:.2e}")
