"""Orthogonalization-free eigensolver for sparse graph pencils ``(W, D)``."""
from __future__ import annotations

from .objective import (
    SCHEMES,
    WorkCounter,
    f1_grad_batch,
    f1_value,
    f2_grad_batch,
    f2_grad_full_matrix,
    f2_value,
    hessian_quadratic_form,
)
from .pencil import BatchPlan, Embedding, Pencil
from .schemes import f1_batch_step, f2_step, normalize_full
from .solver import (
    EpochRecord,
    SolveReport,
    init_embedding,
    load_embedding,
    rayleigh_ritz,
    run_solver,
    save_embedding,
)
from .theory import (
    StepConstants,
    ball_radius,
    random_orthogonal,
    saddle_direction,
    saddle_indices,
    stationary_point,
    step_constants,
)
