"""Delinquency transition matrices over due-instalment states 0..7."""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

N_STATES = 8
BAD_STATE = 7


class TransitionMatrixError(ValueError):
    pass


def validate_matrix(m, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (N_STATES, N_STATES):
        raise TransitionMatrixError(f"expected {N_STATES}x{N_STATES}, got {m.shape}")
    if (m < 0).any():
        raise TransitionMatrixError("negative transition probability")
    if np.abs(m.sum(axis=1) - 1.0).max() > tol:
        raise TransitionMatrixError("rows must sum to 1")
    if m[BAD_STATE, BAD_STATE] != 1.0:
        raise TransitionMatrixError("state 7 must be absorbing")
    return m


def parametric_matrix(worsen, stay, cure) -> np.ndarray:
    """Build a base matrix from per-state worsen/stay/full-cure masses.

    ``worsen[d]`` moves d -> d+1, ``stay[d]`` keeps d, ``cure[d]`` goes to 0.
    Whatever is left of a row (d >= 2) is spread evenly over the partial
    cures 1..d-1.  Row 7 is absorbing.
    """
    m = np.zeros((N_STATES, N_STATES))
    for d in range(BAD_STATE):
        w, s, c = float(worsen[d]), float(stay[d]), float(cure[d])
        if d == 0:
            s, c = 1.0 - w, 0.0
        partial = 1.0 - w - s - c
        if partial < -1e-12 or (d == 1 and partial > 1e-12):
            raise TransitionMatrixError(f"row {d}: masses do not sum to 1")
        m[d, d + 1] = w
        m[d, d] += s
        m[d, 0] += c
        if d >= 2 and partial > 0:
            m[d, 1:d] += partial / (d - 1)
    m[BAD_STATE, BAD_STATE] = 1.0
    return m


def shift_matrices(base, shifts) -> np.ndarray:
    """Apply logit shifts to the worsening mass of every row.

    For each row d the mass on states > d is moved on the logit scale by
    ``shift`` and the remaining entries are rescaled proportionally, so the
    result stays row-stochastic and is stochastically increasing in the shift.
    Returns an array of shape ``(len(shifts), 8, 8)``.
    """
    base = np.asarray(base, dtype=np.float64)
    shifts = np.atleast_1d(np.asarray(shifts, dtype=np.float64))
    upper = np.triu(np.ones((N_STATES, N_STATES), dtype=bool), k=1)
    up = np.where(upper, base, 0.0).sum(axis=1)
    interior = (up > 0.0) & (up < 1.0)
    up_safe = np.where(interior, up, 0.5)
    new_up = expit(logit(up_safe)[None, :] + shifts[:, None])
    up_scale = np.where(interior[None, :], new_up / up_safe[None, :], 1.0)
    down_scale = np.where(interior[None, :], (1.0 - new_up) / (1.0 - up_safe[None, :]), 1.0)
    out = np.where(
        upper[None, :, :],
        base[None, :, :] * up_scale[:, :, None],
        base[None, :, :] * down_scale[:, :, None],
    )
    return out / out.sum(axis=2, keepdims=True)


def sample_next(cum: np.ndarray, rows: np.ndarray, due: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of the next state.

    ``cum`` holds cumulative matrices ``(k, 8, 8)``; ``rows`` selects the
    matrix per account and ``due`` the row within it.
    """
    c = cum[rows, due]
    return np.minimum((c <= u[:, None]).sum(axis=1), BAD_STATE)


def cumulative(mats: np.ndarray) -> np.ndarray:
    cum = np.cumsum(mats, axis=-1)
    cum[..., -1] = 1.0
    return cum
