"""
Propagating embeddings over a graph
===================================

Mixing each method's vector with its graph neighbours lets a method that
shares no words with the query still rank well, because it is called by
something that does.
"""

import numpy as np

from impactrank import CallGraph, EmbeddingMatrix, PropagationConfig, propagate, rank

###############################################################################
# Four methods in two dimensions. Method 1 is identical to the query 0,
# method 2 is orthogonal to it but called by 1, and method 3 is unrelated
# with a small positive similarity.

values = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.3, 1.0]])
graph = CallGraph(4, ((1, 2),))
before = rank(0, EmbeddingMatrix(values), [1, 2, 3])
print("before:", [(i, round(s, 3)) for i, s in before.entries])

###############################################################################
# ``M' = (I + w * sum_i S_i) M`` where ``S_i`` is the symmetrically
# normalized adjacency of nodes exactly ``i`` hops apart. With ``w = 0.5``
# and one order, row 2 becomes ``(0.5, 1)``.

after_m = propagate(EmbeddingMatrix(values), graph, PropagationConfig(w=0.5, max_order=1))
print(after_m.dense())
after = rank(0, after_m, [1, 2, 3])
print("after: ", [(i, round(s, 3)) for i, s in after.entries])

###############################################################################
# Higher orders reach further. On the path 0-1-2 the order-2 term joins the
# two ends, each with degree one.

path = CallGraph(3, ((0, 1), (1, 2)))
print(propagate(EmbeddingMatrix(np.eye(3)), path, PropagationConfig(w=1.0, max_order=2)).dense().round(3))
