"""
Alignment score functions side by side
======================================

Every alignment kind maps a query matrix Q (n_Q x d) and a key matrix K
(n_K x d) to an n_Q x n_K score matrix. This script prints the scores and
softmax weights each kind gives on the same small input, then shows the
two facts that separate the biased variants.
"""

import numpy as np

from alignbench import ALIGNMENT_NAMES, AlignmentSpec, Kind, Rng64, cross_attend, score
from alignbench.numeric import row_softmax

np.set_printoptions(precision=3, suppress=True)

rng = Rng64(7)
Q = rng.normal((2, 4))
K = rng.normal((3, 4))

# Parameterised kinds draw W from N(0, 1/d); b starts at zero, so give it a
# value here to make the biased forms visible.
for name in ALIGNMENT_NAMES:
    spec = AlignmentSpec.from_name(name, d=4, seed=1)
    if spec.b is not None:
        spec = spec.with_params({"W": spec.W, "b": np.array([[0.5, -1.0, 2.0, 0.0]])})
    out = cross_attend(spec, Q, K)
    print(f"{name:>22}  scores {out.scores[0]}  weights {out.weights[0]}")

# In the dagger form the bias adds q.b to a whole row, which softmax ignores.
W = rng.normal((4, 4))
b = rng.normal((1, 4))
dagger = row_softmax(score(AlignmentSpec(Kind.BIASED_GENERAL, False, W, b), Q, K))
plain = row_softmax(score(AlignmentSpec(Kind.GENERAL, False, W), Q, K))
print("\ndagger bias changes weights by", np.abs(dagger - plain).max())

# In the star form the bias adds k.b per key: a query-independent preference.
star = row_softmax(score(AlignmentSpec(Kind.BIASED_GENERAL, True, W, b), Q, K))
plain_star = row_softmax(score(AlignmentSpec(Kind.GENERAL, True, W), Q, K))
print("star bias changes weights by  ", np.abs(star - plain_star).max())

# Scaling by 1/sqrt(d) never changes the ranking, only the sharpness.
dot = score(AlignmentSpec(Kind.DOT), Q, K)
scaled = score(AlignmentSpec(Kind.SCALED_DOT), Q, K)
print("\nsame argmax:", (dot.argmax(1) == scaled.argmax(1)).all())
print("dot weights   ", row_softmax(dot)[0])
print("scaled weights", row_softmax(scaled)[0])
