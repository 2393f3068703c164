"""Local, full and neighbor gradients on the one-moon graph.

All three schemes update one batch of rows at a time. The local scheme only
looks at edges inside the batch. On a sparse graph with small batches that
discards almost all of W, and the iteration stalls far from the eigenvector.
The neighbor scheme reads the rows of the batch and produces the same
iterates as the full scheme at a cost independent of n.
"""
from __future__ import annotations

import time

import numpy as np

from specnet.data import gen_one_moon
from specnet.graph import build_gaussian_affinity, largest_component, subgraph
from specnet.la import BatchPlan, Pencil, WorkCounter, rayleigh_ritz, run_solver
from specnet.oracle import relative_error

pc = gen_one_moon(500, seed=0)
W = build_gaussian_affinity(pc, sigma=0.1, threshold=0.6)
W = subgraph(W, largest_component(W))
p = Pencil.from_affinity(W, deflate=True)
ref = p.oracle()
print(f"one moon: n = {p.n}, {W.nnz / p.n:.1f} nonzeros per row")

plan = BatchPlan.random(p.n, 4, seed=0)
Y0 = np.random.default_rng(1).uniform(-1, 1, (p.n, 2))
epochs = 200

for scheme, alpha in (("neighbor", 10.0), ("full", 10.0), ("local", 0.1)):
    errs = []

    def track(rec, emb):
        if rec.epoch % 50 == 0:
            U, _ = rayleigh_ritz(p, emb.Y)
            errs.append(relative_error(ref.eigenvectors[:, 0], U[:, 0]))

    counter = WorkCounter()
    t0 = time.perf_counter()
    run_solver(p, 2, "f2", scheme, plan=plan, alpha=alpha, epochs=epochs, Y0=Y0, counter=counter, callback=track)
    per_step = counter.madds / counter.steps
    print(f"{scheme:>8}: rel err every 50 epochs {np.round(errs, 4).tolist()}  "
          f"({per_step:.0f} multiply-adds per step, {time.perf_counter() - t0:.1f} s)")
