"""
Mean nearest neighbor overlap
=============================

Two vector sets describe the same items in different spaces.  How similar
is their neighborhood structure?  For each item, take its K nearest
neighbors in each space and count how many are shared; average the shared
fraction over items.
"""

import numpy as np

from crossmap.data import VectorSet
from crossmap.neighbors import mean_nn_overlap, nn_overlap, top_k_neighbors
from crossmap.synth import SynthSpec, generate_synthetic_paired

# A toy vocabulary.  In the text space, cat's three nearest neighbors are
# dog, tiger and lion; in the image space they are mouse, tiger and lion.
words = ["cat", "dog", "tiger", "lion", "mouse"]
text_nn = ["dog", "tiger", "lion"]
image_nn = ["mouse", "tiger", "lion"]
print("NNO^3(cat) =", nn_overlap([words.index(w) for w in text_nn], [words.index(w) for w in image_nn]))

# Neighbor lists themselves: self is excluded, ties go to the lower index.
pts = VectorSet(("a", "b", "c", "d"), [[0, 0], [1, 0], [0, 1], [10, 10]])
idx = top_k_neighbors(pts, 2, "euclidean")
print("neighbors of a:", [pts.keys[j] for j in idx.row(0)])

# A set compared with itself, or with any rescaled copy, overlaps fully.
rng = np.random.default_rng(0)
v = rng.standard_normal((200, 16))
print("mNNO(V, V)   =", mean_nn_overlap(v, v, 10))
print("mNNO(V, 3V)  =", mean_nn_overlap(v, 3 * v, 10))
print("mNNO(V, rnd) =", round(mean_nn_overlap(v, rng.standard_normal((200, 16)), 10), 3))

# Synthetic paired data: X and Y share only class-level structure.  As the
# item-level noise in Y grows, the overlap between X and Y decays.
print("\nnoise_y   mNNO(X, Y)")
for noise_y in (0.0, 0.5, 2.0, 5.0, 10.0):
    ds = generate_synthetic_paired(SynthSpec(noise_x=0.1, noise_y=noise_y, seed=1))
    print(f"{noise_y:7.1f}   {mean_nn_overlap(ds.x, ds.y, 10):.3f}")
