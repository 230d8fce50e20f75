"""Joint beam search over (transcript, translation) pairs on a hand-made distribution.

A TableScorer assigns a random next-token distribution to every pair of
prefixes, which is small enough to enumerate. The beam result is compared
with the best pair found by brute force, and the length bonus is shown.
"""
import itertools

from duodec.decoding import BeamConfig, greedy_decode, joint_beam_search
from duodec.decoding.table import TableScorer

V, EOS, MAX = 3, 2, 3
table = TableScorer(V, seed=4, eos_id=EOS)
content = [t for t in range(V) if t != EOS]
pairs = [(list(a), list(b)) for n in range(MAX + 1) for m in range(MAX + 1)
         for a in itertools.product(content, repeat=n) for b in itertools.product(content, repeat=m)]

for penalty in (0.0, 0.5):
    best = max(pairs, key=lambda p: table.sequence_log_prob(*p, MAX, MAX) + penalty * (len(p[0]) + len(p[1])))
    found = joint_beam_search(table, 0, BeamConfig(beam_size=V ** MAX, length_penalty=penalty, max_len_y=MAX,
                                                   max_len_z=MAX, per_stream_topk=V))
    top = found[0]
    print(f"penalty {penalty}: beam picks y={top.y} z={top.z} score {top.score:.4f}; "
          f"enumeration over {len(pairs)} pairs picks y={best[0]} z={best[1]}")
    for r in found[:3]:
        print(f"    y={r.y!s:10} z={r.z!s:10} log_prob={r.log_prob:.4f} score={r.score:.4f}")

g = greedy_decode(table, 0, MAX, MAX)
print(f"greedy: y={g.y} z={g.z} log_prob={g.log_prob:.4f}")
