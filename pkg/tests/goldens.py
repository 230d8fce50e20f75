"""Hand-evaluated metric cases.

Each BLEU expectation is written as the closed form obtained by counting
clipped n-gram matches by hand; each WER expectation is edits / ref length.
"""
import math
from functools import lru_cache


def w(text):
    return text.split()


# (ref, hyp, expected WER fraction)
WER_CASES = [
    (w("a b c"), w("a b c"), 0.0),
    (w("a b c"), w("a x c"), 1 / 3),                 # one substitution
    (w("a b"), w("a b c"), 1 / 2),                   # one insertion
    (w("a b c"), [], 1.0),                           # three deletions
    (w("a"), w("b c d"), 3.0),                       # substitution plus two insertions
    (list("kitten"), list("sitting"), 3 / 6),        # k->s, e->i, insert g
    (w("a b c d"), w("d c b a"), 1.0),               # best alignment keeps one token, four edits
    (w("the cat sat on the mat"), w("the cat sat on mat"), 1 / 6),
    (w("a b c d e"), w("x a b c d"), 2 / 5),         # insert x, delete e
    (w("a b a b"), w("b a b a"), 2 / 4),             # delete leading a, append a
]

# (refs, hyps, max_order, expected BLEU on the 0..100 scale)
BLEU_CASES = [
    ([w("a b c d e")], [w("a b c d e")], 4, 100.0),
    ([w("a b c d")], [[]], 4, 0.0),
    # unigram-only degenerate corpus: clipped 1/3, hypothesis longer so no brevity penalty
    ([w("the cat")], [w("the the the")], 1, 100.0 / 3.0),
    # all precisions 1, c=4 < r=6
    ([w("a b c d e f")], [w("a b c d")], 4, 100.0 * math.exp(1.0 - 6 / 4)),
    # p1 = 4/5, p2 = 2/4
    ([w("a b x d e")], [w("a b c d e")], 2, 100.0 * math.sqrt(4 / 5 * 2 / 4)),
    # p = 5/6, 4/5, 3/4, 2/3 whose product is 1/3
    ([w("a b c d e g")], [w("a b c d e f")], 4, 100.0 * (1 / 3) ** 0.25),
    # two sentences: p = 8/9, 6/7, 4/5, 2/3, equal total lengths
    ([w("a b c d e"), w("x y z q")], [w("a b c d e"), w("x y z w")], 4,
     100.0 * (384 / 945) ** 0.25),
    # clipping: six a's against two, bigram aa five times against once
    ([w("a a b b c c")], [w("a a a a a a")], 2, 100.0 * math.sqrt(1 / 15)),
    # hypothesis twice the reference: p = 4/8, 3/7, 2/6, 1/5
    ([w("a b c d")], [w("a b c d e f g h")], 4, 100.0 * (1 / 70) ** 0.25),
    # corpus brevity: c=5, r=7, all trigram-or-lower precisions 1
    ([w("a b c"), w("d e f g")], [w("a b c"), w("d e")], 3, 100.0 * math.exp(1.0 - 7 / 5)),
]


def reference_edit_distance(ref, hyp):
    """Levenshtein distance by memoized recursion on suffixes (independent of the iterative table)."""
    ref, hyp = tuple(ref), tuple(hyp)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        return min(d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (ref[i] != hyp[j]))

    return d(0, 0)
