"""
Affinity propagation, one message at a time
===========================================

The four points 0, 1, 10 and 11 on a line are small enough to follow every
responsibility and availability update.
"""

import numpy as np

from apsent.affinity import (ApParams, ap_fit, exemplar_set, net_similarity, similarity_matrix,
                             update_availabilities, update_responsibilities)

X = np.array([[0.0], [1.0], [10.0], [11.0]])

state = similarity_matrix(X, perturb=False)
print("preference (median off-diagonal similarity):", state.preference)
print(state.s)

# a few damped iterations; the self-evidence r(k,k) + a(k,k) decides exemplars
for it in range(1, 41):
    update_responsibilities(state, 0.9)
    update_availabilities(state, 0.9)
    if it % 10 == 0:
        evidence = np.diagonal(state.r) + np.diagonal(state.a)
        print(it, np.round(evidence, 3), "exemplars:", exemplar_set(state))

fit = ap_fit(X)
print("labels", fit.labels, "exemplars", fit.exemplars, "iterations", fit.n_iter)
print("net similarity", fit.net_similarity)

# a single exemplar is much worse for this preference
print("one exemplar:", net_similarity([0, 0, 0, 0], [0], state))

# raising the preference makes every point its own exemplar
print(ap_fit(X, ApParams(preference=1.0)).labels)
