"""Hand-computed expected values for the metric suite.

Every expectation below was derived on paper from the definitions (clipped
n-gram precision, uniform weights over populated levels, brevity penalty
exp(1 - r/c) when c <= r, cosine = dot / (|a||b|)); the implementation was
never consulted for these numbers. Counts are spelled out in comments so a
reviewer can re-derive them.
"""

import math

# (vector_a, vector_b, expected)
COSINE_CASES = [
    # identical unit vectors
    ([1.0, 0.0], [1.0, 0.0], 1.0),
    # orthogonal
    ([1.0, 0.0], [0.0, 1.0], 0.0),
    # opposite
    ([1.0, 0.0], [-1.0, 0.0], -1.0),
    # 45 degrees: dot=1, |a|=sqrt(2), |b|=1
    ([1.0, 1.0], [1.0, 0.0], math.sqrt(0.5)),
    # dot=4+10+18=32, norms sqrt(14), sqrt(77)
    ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], 32.0 / math.sqrt(14.0 * 77.0)),
    # scale does not matter
    ([2.0, 0.0], [1.0, 0.0], 1.0),
    ([1.0, 2.0], [2.0, 4.0], 1.0),
    # dot=24, norms 5 and 5
    ([3.0, 4.0], [4.0, 3.0], 24.0 / 25.0),
    # dot=1, norms 1 and sqrt(3)
    ([1.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0 / math.sqrt(3.0)),
    # dot=-4, norms sqrt(5) twice
    ([2.0, -1.0], [-1.0, 2.0], -0.8),
    # dot=0.25-0.25
    ([0.5, 0.5], [0.5, -0.5], 0.0),
    # dot=18, norms 3 and 6
    ([1.0, 2.0, 2.0], [2.0, 4.0, 4.0], 1.0),
]

# (candidate_tokens, reference_token_lists, max_n, smoothing, expected)
BLEU_CASES = [
    # p1 = 5/6 (clip "the" to 1), p2 = 3/5, c = r = 6 so BP = 1
    (
        "the cat sat on the mat".split(),
        ["the cat sat on a mat".split()],
        2,
        False,
        math.sqrt((5.0 / 6.0) * (3.0 / 5.0)),
    ),
    # candidate equals reference; 4-gram level empty and excluded
    ("the cat sat".split(), ["the cat sat".split()], 4, False, 1.0),
    # single token, only the unigram level is populated
    (["hello"], [["hello"]], 4, False, 1.0),
    # perfect precisions but c=2 < r=3: BP = exp(1 - 3/2)
    ("the cat".split(), ["the cat sat".split()], 4, False, math.exp(-0.5)),
    # no overlap at all
    ("dogs bark loud".split(), ["cats meow quietly".split()], 4, False, 0.0),
    # add-one smoothing: p1=(0+1)/(3+1), p2=(0+1)/(2+1), BP=1
    (
        "dogs bark loud".split(),
        ["cats meow quietly".split()],
        2,
        True,
        math.sqrt((1.0 / 4.0) * (1.0 / 3.0)),
    ),
    # smoothing applies to every level: p1=(2+1)/(3+1), p2=(1+1)/(2+1)
    (
        "the cat sat".split(),
        ["the cat nap".split()],
        2,
        True,
        math.sqrt((3.0 / 4.0) * (2.0 / 3.0)),
    ),
    # clipping: "the" appears once in the reference, so p1 = 1/4
    ("the the the the".split(), ["the cat".split()], 1, False, 0.25),
    # closest reference length, tie broken toward the shorter (r=2, BP=1)
    (
        "a b c".split(),
        ["a b".split(), "a b c d".split()],
        4,
        False,
        1.0,
    ),
    # clip against the best reference per n-gram:
    # p1 = 3/4, p2 = 2/3, p3 = 1/2, r = 4 = c so BP = 1
    (
        "the cat the cat".split(),
        ["the cat".split(), "cat the cat sat".split()],
        3,
        False,
        (0.25) ** (1.0 / 3.0),
    ),
    # longer candidate, unigram only: p1 = 2/4, BP = 1
    ("a b c d".split(), ["a b".split()], 1, False, 0.5),
    # substitution in the middle: p1 = 2/3, c = r so BP = exp(0) = 1
    ("a b c".split(), ["a x c".split()], 1, False, 2.0 / 3.0),
]
