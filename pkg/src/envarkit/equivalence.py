"""Observational and scale-free equivalence orbits and alignment discrepancies.

Two admissible structural models generate the same stationary observed law
exactly when one is an orbit transform of the other: ``B' = c Q B``,
``a1' = c Q a1``, ``sigma' = c sigma`` for orthogonal ``Q`` and ``c > 0``.
The alignment discrepancies measure squared distance from a test model to the
orbit of a reference model, minimized in closed form over ``(Q, c)`` via the
singular values of ``S S'^T`` where ``S = [B | a1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._descent import (
    OrbitObjective,
    minimize_orbit_objective,
    random_signs,
    random_skew,
)
from ._seeding import sub_rng
from .errors import DimensionError
from .model_core import (
    DEFAULT_TOLERANCES,
    StructuralModel,
    Tolerances,
    _check_square,
    _require_admissible,
    to_reduced_form,
)

# Relative singular-value gap below which optimal aligners are flagged non-unique.
_SV_GAP_RTOL = 1e-8
# Roundoff clamp: provably nonnegative discrepancies this close to zero snap to 0.
_VALUE_CLAMP = 1e-9
# Nuclear norms at or below this are treated as exactly zero (infimum as c -> 0).
_ALPHA_ZERO = 1e-12

_SEARCH_MAX_STEPS = 5000
_SEARCH_PATIENCE = 500
_SEARCH_DIAG_TOL = 1e-6
_SEARCH_LEARN_RATE = 5e-3
_SEARCH_GRAD_CLIP = 1.0
_SEARCH_DISTINCT_TOL = 1e-4


@dataclass(frozen=True)
class OrbitElement:
    """An orthogonal matrix and positive scale acting on structural equations."""

    q: np.ndarray
    c: float

    def __post_init__(self):
        q = _check_square(self.q, "q")
        defect = float(np.linalg.norm(q.T @ q - np.eye(q.shape[0]), "fro"))
        if defect > DEFAULT_TOLERANCES.orthogonality:
            raise DimensionError(f"q has orthogonality defect {defect:.3e}")
        c = float(self.c)
        if not math.isfinite(c) or c <= 0.0:
            raise DimensionError(f"c must be a positive finite real, got {c}")
        frozen = np.array(q, dtype=float)
        frozen.setflags(write=False)
        object.__setattr__(self, "q", frozen)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class StackedStructural:
    """The ``p x 2p`` stack ``[B | a1]`` together with the noise scale."""

    s: np.ndarray
    sigma: float


@dataclass(frozen=True)
class AlignmentResult:
    """Optimal discrepancy and its attaining transform.

    ``unique_q`` is False when the aligning orthogonal matrix is not unique
    (repeated or zero singular values); ``infimum_not_attained`` marks the
    degenerate scale-free case where the infimum is only approached as c -> 0.
    """

    value: float
    q_star: np.ndarray
    c_star: float
    alpha: float
    unique_q: bool
    infimum_not_attained: bool = False


class SfEquivalence(NamedTuple):
    equivalent: bool
    scale: float


def stacked(m: StructuralModel) -> StackedStructural:
    """Stack a model as ``[B | a1]``."""
    return StackedStructural(s=np.hstack([m.b, m.a1]), sigma=m.sigma)


def orbit_transform(m: StructuralModel, e: OrbitElement) -> StructuralModel:
    """Apply ``(Q, c)``: returns ``(I - c Q B, c Q a1, c sigma)``.

    The output induces the same reduced form, hence is admissible whenever the
    input is.
    """
    _require_admissible(m, DEFAULT_TOLERANCES)
    if e.q.shape[0] != m.p:
        raise DimensionError(f"orbit element is {e.q.shape[0]}-dim, model is {m.p}-dim")
    cqb = e.c * (e.q @ m.b)
    return StructuralModel(
        a0=np.eye(m.p) - cqb, a1=e.c * (e.q @ m.a1), sigma=e.c * m.sigma
    )


def obs_equivalent(
    m1: StructuralModel,
    m2: StructuralModel,
    tol: float = 1e-8,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> bool:
    """True iff the induced ``(phi, sigma_u)`` pairs agree entrywise within tol."""
    rf1 = to_reduced_form(m1, tolerances)
    rf2 = to_reduced_form(m2, tolerances)
    return bool(
        np.max(np.abs(rf1.phi - rf2.phi)) <= tol
        and np.max(np.abs(rf1.sigma_u - rf2.sigma_u)) <= tol
    )


def sf_equivalent(
    m1: StructuralModel,
    m2: StructuralModel,
    tol: float = 1e-8,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> SfEquivalence:
    """Check equality of laws up to a global amplitude; returns the scale ``a``.

    ``a`` is estimated as ``trace(sigma_u') / trace(sigma_u)``; equivalence
    requires equal ``phi`` within tol and ``sigma_u' = a sigma_u`` within tol
    relative max-abs.
    """
    rf1 = to_reduced_form(m1, tolerances)
    rf2 = to_reduced_form(m2, tolerances)
    scale = float(np.trace(rf2.sigma_u) / np.trace(rf1.sigma_u))
    phi_ok = bool(np.max(np.abs(rf1.phi - rf2.phi)) <= tol)
    denom = max(float(np.max(np.abs(rf2.sigma_u))), np.finfo(float).tiny)
    cov_ok = bool(np.max(np.abs(rf2.sigma_u - scale * rf1.sigma_u)) / denom <= tol)
    return SfEquivalence(equivalent=phi_ok and cov_ok, scale=scale)


def _svd_cross(s_ref: np.ndarray, s_test: np.ndarray):
    cross = s_ref @ s_test.T
    u, gamma, vt = np.linalg.svd(cross)
    alpha = float(gamma.sum())
    scale = gamma[0] if gamma[0] > 0.0 else 1.0
    repeated = bool(np.any(np.diff(gamma) > -_SV_GAP_RTOL * scale)) if gamma.size > 1 else False
    has_zero = bool(np.any(gamma <= _SV_GAP_RTOL * scale))
    q_star = vt.T @ u.T
    return alpha, q_star, not (repeated or has_zero)


def _clamp(value: float) -> float:
    if value < 0.0 and value >= -_VALUE_CLAMP:
        return 0.0
    return value


def align_obs(
    m_ref: StructuralModel, m_test: StructuralModel, eta: float = 1.0
) -> AlignmentResult:
    """One-sided discrepancy from ``m_test`` to the orbit of ``m_ref``.

    Minimizes ``||S' - c Q S||_F^2 + eta (sigma' - c sigma)^2`` over orthogonal
    ``Q`` and ``c > 0``, in closed form: with ``alpha = ||S S'^T||_*``,

        value = ||S'||_F^2 + eta sigma'^2
                - (alpha + eta sigma sigma')^2 / (||S||_F^2 + eta sigma^2).

    The infimum transforms the reference stack; ``m_test`` supplies ``S'``.
    """
    if m_ref.p != m_test.p:
        raise DimensionError(f"dimension mismatch: {m_ref.p} vs {m_test.p}")
    eta = float(eta)
    if eta < 0.0:
        raise DimensionError(f"eta must be >= 0, got {eta}")
    ref, test = stacked(m_ref), stacked(m_test)
    alpha, q_star, unique_q = _svd_cross(ref.s, test.s)
    s_ref_sq = float(np.sum(ref.s**2))
    s_test_sq = float(np.sum(test.s**2))
    denom = s_ref_sq + eta * ref.sigma**2
    numer = alpha + eta * ref.sigma * test.sigma
    if denom <= np.finfo(float).tiny or numer <= _ALPHA_ZERO:
        return AlignmentResult(
            value=_clamp(s_test_sq + eta * test.sigma**2),
            q_star=q_star,
            c_star=0.0,
            alpha=alpha,
            unique_q=unique_q,
            infimum_not_attained=True,
        )
    value = _clamp(s_test_sq + eta * test.sigma**2 - numer**2 / denom)
    return AlignmentResult(
        value=value, q_star=q_star, c_star=numer / denom, alpha=alpha, unique_q=unique_q
    )


def align_sf(m_ref: StructuralModel, m_test: StructuralModel) -> AlignmentResult:
    """Scale-free discrepancy: ``align_obs`` with the noise term dropped.

    ``value = ||S'||_F^2 - alpha^2 / ||S||_F^2``. When ``alpha`` vanishes the
    infimum ``||S'||_F^2`` is approached as ``c -> 0`` and is flagged as not
    attained (``c_star`` reported as 0).
    """
    if m_ref.p != m_test.p:
        raise DimensionError(f"dimension mismatch: {m_ref.p} vs {m_test.p}")
    ref, test = stacked(m_ref), stacked(m_test)
    alpha, q_star, unique_q = _svd_cross(ref.s, test.s)
    s_ref_sq = float(np.sum(ref.s**2))
    s_test_sq = float(np.sum(test.s**2))
    if alpha <= _ALPHA_ZERO or s_ref_sq <= np.finfo(float).tiny:
        return AlignmentResult(
            value=_clamp(s_test_sq),
            q_star=q_star,
            c_star=0.0,
            alpha=alpha,
            unique_q=unique_q,
            infimum_not_attained=True,
        )
    value = _clamp(s_test_sq - alpha**2 / s_ref_sq)
    return AlignmentResult(
        value=value,
        q_star=q_star,
        c_star=alpha / s_ref_sq,
        alpha=alpha,
        unique_q=unique_q,
    )


def sym_discrepancy(
    m1: StructuralModel, m2: StructuralModel, eta: float = 1.0
) -> float:
    """Symmetric reporting score: the mean of the two one-sided discrepancies."""
    return 0.5 * (align_obs(m1, m2, eta).value + align_obs(m2, m1, eta).value)


def normalized_orbit_search(
    m: StructuralModel, seed: int, restarts: int = 16
) -> list[StructuralModel]:
    """Search the orbit of ``m`` for representatives with unit diagonal ``B``.

    Minimizes ``||diag(c Q B) - 1||_2^2`` over ``(Q, c)`` from random
    orthogonal starts. Returns up to ``restarts`` distinct models whose
    diagonal residual is at most 1e-6, each observationally equivalent to
    ``m``; the list is empty when no start converges, since normalized
    representatives need not exist.
    """
    _require_admissible(m, DEFAULT_TOLERANCES)
    restarts = int(restarts)
    if restarts < 1:
        raise DimensionError(f"restarts must be >= 1, got {restarts}")
    p = m.p
    b = m.b
    found: list[StructuralModel] = []
    for r in range(restarts):
        rng = sub_rng(seed, 0x6F72626E, r)
        # restart 0 descends from the identity element so exact or pure-scale
        # normalizations are recovered as themselves; later restarts are random
        signs = np.ones(p) if r == 0 else random_signs(p, rng)
        k0 = np.zeros((p, p)) if r == 0 else random_skew(p, rng)
        base = signs[:, None] * b
        objective = OrbitObjective(g_mat=base, h_mat=np.zeros((p, p)), w_diag=1.0)
        result = minimize_orbit_objective(
            objective,
            k0=k0,
            log_c0=0.0,
            learn_rate=_SEARCH_LEARN_RATE * (5.0 / p),
            max_steps=_SEARCH_MAX_STEPS,
            grad_clip=_SEARCH_GRAD_CLIP,
            convergence_tol=1e-12,
            patience=_SEARCH_PATIENCE,
            c_bounds=(1e-6, 1e6),
        )
        # objective value is the squared 2-norm of the diagonal residual
        if math.sqrt(max(result.objective, 0.0)) > _SEARCH_DIAG_TOL:
            continue
        q_total = result.q @ np.diag(signs)
        candidate = orbit_transform(m, OrbitElement(q=q_total, c=result.c))
        if any(
            np.max(np.abs(candidate.a0 - other.a0)) <= _SEARCH_DISTINCT_TOL
            and np.max(np.abs(candidate.a1 - other.a1)) <= _SEARCH_DISTINCT_TOL
            for other in found
        ):
            continue
        found.append(candidate)
    return found
