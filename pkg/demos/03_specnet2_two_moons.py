"""Clustering two moons with a SpecNet2 network.

The network maps a point to its value on the first nontrivial eigenvector.
It is trained on f2 with the neighbor scheme, so no QR or Cholesky factor
is ever formed. Splitting the output with 1-D k-means recovers the moons,
and the same network labels points it never saw during training.
"""
from __future__ import annotations

import numpy as np

from specnet.data import clustering_accuracy, gen_two_moons, kmeans_1d
from specnet.graph import build_gaussian_affinity
from specnet.la import Pencil
from specnet.nn import init_mlp, mlp_forward, train

train_pc = gen_two_moons(600, seed=0)
test_pc = gen_two_moons(600, seed=1)
W = build_gaussian_affinity(train_pc, sigma=0.15, threshold=0.08)
p = Pencil.from_affinity(W, deflate=True)
ref = p.oracle()
print("accuracy of the exact eigenvector:",
      clustering_accuracy(kmeans_1d(ref.eigenvectors[:, 0]), train_pc.labels))

params = init_mlp([2, 128, 1], seed=0)


def progress(epoch, prm, orth):
    if epoch % 50 == 0:
        acc = clustering_accuracy(kmeans_1d(mlp_forward(prm, train_pc.points)[:, 0]), train_pc.labels)
        print(f"epoch {epoch:4d}: train accuracy {acc:.3f}")


train(params, train_pc.points, p, "specnet2", "neighbor", batch_size=4, lr=1e-3, epochs=300, seed=0,
      callback=progress)
test_acc = clustering_accuracy(kmeans_1d(mlp_forward(params, test_pc.points)[:, 0]), test_pc.labels)
print(f"held-out accuracy: {test_acc:.3f}")
