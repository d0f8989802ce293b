"""
One session without basis announcement
======================================

Alice and Bob share a short secret seed that fixes the bases, so no
measurement is discarded. Check bits estimate the error rate, two-way steps
bring it down, and a Steane code pair turns the rest into key.
"""

from twoway_bb84.channel import InterceptResend, PauliChannel
from twoway_bb84.distill import records_to_csv
from twoway_bb84.session import SessionParams, key_digest, run_session

# bit-flip rate 0.10, close to the one-way limit
params = SessionParams(n=65536, channel=PauliChannel.depolarizing(0.15), seed=1)
out = run_session(params)
print(out.status, "qber", round(out.observed_qber, 4), "rounds", out.rounds_executed)
print(records_to_csv(out.records))
print("key bits", out.alice_key.size, "match", out.keys_match, key_digest(out.alice_key)[:16])

###############################################################################
# What an eavesdropper reads on the public channel
for line in out.transcript.dumps().splitlines()[:6]:
    print(line[:90])

###############################################################################
# Intercept-resend without basis knowledge shows up as a 25% error rate
eve = run_session(SessionParams(n=4096, channel=InterceptResend(), seed=1))
print(eve.status, eve.reason)
