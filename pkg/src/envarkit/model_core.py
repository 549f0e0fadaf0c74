"""Structural and reduced-form VAR(1) types and stationary-law computations.

A structural model is the triple ``(a0, a1, sigma)`` of contemporaneous
effects, lag-one effects, and the common structural noise standard deviation.
Writing ``B = I - a0``, an admissible model induces the reduced form
``phi = B^{-1} a1`` with residual covariance ``sigma_u = sigma^2 B^{-1} B^{-T}``,
which together determine the stationary law of the observed process.

All types are immutable after construction and all operations are pure
functions of their inputs plus an explicit seed, so they are safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AdmissibilityError,
    DimensionError,
    FactorizationError,
    NotPositiveDefiniteError,
    StabilityError,
)


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used by validity checks, overridable per call.

    inv_rank: smallest/largest singular value ratio below which a matrix is
        treated as singular.
    symmetry: maximum absolute asymmetry allowed in covariance inputs.
    lyapunov: relative Frobenius residual accepted for stationary covariances.
    orthogonality: Frobenius defect allowed in ``Q^T Q - I``.
    """

    inv_rank: float = 1e-10
    symmetry: float = 1e-10
    lyapunov: float = 1e-8
    orthogonality: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()

# Dimension above which the stationary covariance switches from the exact
# vectorized solve to fixed-point iteration.
_LYAPUNOV_DIRECT_MAX_DIM = 60
_LYAPUNOV_MAX_ITER = 10_000


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _check_square(m: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DimensionError(f"{name} must have dimension >= 1")
    if not np.isfinite(arr).all():
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class StructuralModel:
    """Structural VAR(1) parameters ``(a0, a1, sigma)``.

    ``a0`` holds contemporaneous effects with entry (i, j) meaning j -> i
    within the same sampling interval; ``a1`` holds lag-one effects; ``sigma``
    is the common structural noise standard deviation. Admissibility and
    normalization are checkable predicates, not constructor requirements.
    """

    a0: np.ndarray
    a1: np.ndarray
    sigma: float

    def __post_init__(self):
        a0 = _check_square(self.a0, "a0")
        a1 = _check_square(self.a1, "a1")
        if a0.shape != a1.shape:
            raise DimensionError(
                f"a0 and a1 must have the same shape, got {a0.shape} and {a1.shape}"
            )
        sigma = float(self.sigma)
        if not math.isfinite(sigma) or sigma <= 0.0:
            raise DimensionError(f"sigma must be a positive finite real, got {sigma}")
        object.__setattr__(self, "a0", _freeze(a0))
        object.__setattr__(self, "a1", _freeze(a1))
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.a0.shape[0]

    @property
    def b(self) -> np.ndarray:
        """Contemporaneous system matrix ``B = I - a0``."""
        return np.eye(self.p) - self.a0


@dataclass(frozen=True)
class ReducedForm:
    """Reduced-form parameters: transition matrix and residual covariance."""

    phi: np.ndarray
    sigma_u: np.ndarray

    def __post_init__(self):
        phi = _check_square(self.phi, "phi")
        sigma_u = _check_square(self.sigma_u, "sigma_u")
        if phi.shape != sigma_u.shape:
            raise DimensionError(
                f"phi and sigma_u must match, got {phi.shape} and {sigma_u.shape}"
            )
        asym = float(np.max(np.abs(sigma_u - sigma_u.T)))
        if asym > DEFAULT_TOLERANCES.symmetry:
            raise DimensionError(
                f"sigma_u asymmetry {asym:.3e} exceeds tolerance "
                f"{DEFAULT_TOLERANCES.symmetry:.0e}"
            )
        try:
            np.linalg.cholesky(0.5 * (sigma_u + sigma_u.T))
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("sigma_u is not positive definite") from None
        object.__setattr__(self, "phi", _freeze(phi))
        object.__setattr__(self, "sigma_u", _freeze(0.5 * (sigma_u + sigma_u.T)))

    @property
    def p(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class StationaryLaw:
    """Lag-0 covariance and lag-1 cross-covariance of the stationary process."""

    sigma_x: np.ndarray
    gamma1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma_x", _freeze(self.sigma_x))
        object.__setattr__(self, "gamma1", _freeze(self.gamma1))


@dataclass(frozen=True)
class TimeSeries:
    """A ``p x T`` observation matrix; columns are consecutive time steps."""

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise DimensionError(f"series must be a 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DimensionError("series contains non-finite entries")
        object.__setattr__(self, "values", _freeze(arr))
        object.__setattr__(self, "centered", bool(self.centered))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def t_len(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of an admissibility check, with per-condition diagnostics."""

    admissible: bool
    reasons: tuple[str, ...]
    b_condition: float
    phi_spectral_radius: float

    def __bool__(self) -> bool:
        return self.admissible


def spectral_radius(m: np.ndarray) -> float:
    """Maximum eigenvalue modulus of a square matrix."""
    arr = _check_square(m, "matrix")
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def is_normalized(m: StructuralModel, tol: float = 1e-12) -> bool:
    """True when ``diag(a0) = 0`` entrywise, i.e. ``diag(B) = 1``."""
    return bool(np.max(np.abs(np.diag(m.a0))) <= tol)


def is_admissible(
    m: StructuralModel, tol: Tolerances = DEFAULT_TOLERANCES
) -> AdmissibilityReport:
    """Check invertibility of ``B``, stability of ``B^{-1} a1``, and ``sigma > 0``.

    Returns a report that is truthy iff all conditions hold; ``reasons`` names
    each failed condition.
    """
    reasons: list[str] = []
    b = m.b
    svals = np.linalg.svd(b, compute_uv=False)
    b_condition = float(svals[-1] / svals[0]) if svals[0] > 0.0 else 0.0
    rho = float("nan")
    if b_condition <= tol.inv_rank:
        reasons.append("B singular")
    else:
        rho = spectral_radius(np.linalg.solve(b, m.a1))
        if rho >= 1.0:
            reasons.append("unstable")
    if m.sigma <= 0.0:
        reasons.append("sigma nonpositive")
    return AdmissibilityReport(
        admissible=not reasons,
        reasons=tuple(reasons),
        b_condition=b_condition,
        phi_spectral_radius=rho,
    )


def _require_admissible(m: StructuralModel, tol: Tolerances) -> AdmissibilityReport:
    report = is_admissible(m, tol)
    if not report:
        raise AdmissibilityError(
            f"model is not admissible: {', '.join(report.reasons)}", diagnostics=report
        )
    return report


def to_reduced_form(
    m: StructuralModel, tol: Tolerances = DEFAULT_TOLERANCES
) -> ReducedForm:
    """Map an admissible structural model to ``(phi, sigma_u)``.

    ``sigma_u`` is symmetrized after the product to remove roundoff asymmetry,
    so downstream Cholesky factorizations see an exactly symmetric matrix.
    """
    _require_admissible(m, tol)
    b = m.b
    phi = np.linalg.solve(b, m.a1)
    b_inv = np.linalg.solve(b, np.eye(m.p))
    sigma_u = (m.sigma**2) * (b_inv @ b_inv.T)
    sigma_u = 0.5 * (sigma_u + sigma_u.T)
    return ReducedForm(phi=phi, sigma_u=sigma_u)


def is_stable(rf: ReducedForm) -> bool:
    """True when the reduced-form transition matrix has spectral radius < 1."""
    return spectral_radius(rf.phi) < 1.0


def stationary_covariance(
    rf: ReducedForm, tol: Tolerances = DEFAULT_TOLERANCES
) -> StationaryLaw:
    """Solve ``sigma_x = phi sigma_x phi^T + sigma_u`` for the stationary law.

    Uses the exact vectorized linear system up to dimension 60 and fixed-point
    iteration above that. The returned ``gamma1`` is ``phi @ sigma_x``.
    """
    rho = spectral_radius(rf.phi)
    if rho >= 1.0:
        raise StabilityError(f"phi has spectral radius {rho:.6f} >= 1")
    p = rf.p
    phi, sigma_u = rf.phi, rf.sigma_u
    if p <= _LYAPUNOV_DIRECT_MAX_DIM:
        lhs = np.eye(p * p) - np.kron(phi, phi)
        vec = np.linalg.solve(lhs, sigma_u.reshape(-1, order="F"))
        sigma_x = vec.reshape(p, p, order="F")
    else:
        sigma_x = sigma_u.copy()
        bound = tol.lyapunov * (1.0 + np.linalg.norm(sigma_u, "fro"))
        for _ in range(_LYAPUNOV_MAX_ITER):
            nxt = phi @ sigma_x @ phi.T + sigma_u
            if np.linalg.norm(nxt - phi @ nxt @ phi.T - sigma_u, "fro") <= bound:
                sigma_x = nxt
                break
            sigma_x = nxt
    sigma_x = 0.5 * (sigma_x + sigma_x.T)
    residual = np.linalg.norm(sigma_x - phi @ sigma_x @ phi.T - sigma_u, "fro")
    bound = tol.lyapunov * (1.0 + np.linalg.norm(sigma_u, "fro"))
    if residual > bound:
        raise StabilityError(
            f"stationary covariance residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return StationaryLaw(sigma_x=sigma_x, gamma1=phi @ sigma_x)


def _stationary_start(
    phi: np.ndarray, sigma_u: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One draw from the stationary distribution N(0, sigma_x)."""
    law = stationary_covariance(ReducedForm(phi=phi, sigma_u=sigma_u))
    sigma_x = np.asarray(law.sigma_x)
    try:
        chol = np.linalg.cholesky(sigma_x)
    except np.linalg.LinAlgError:
        # PD in exact arithmetic; nudge out of a borderline numerical failure.
        jitter = 1e-12 * (1.0 + np.trace(sigma_x) / sigma_x.shape[0])
        chol = np.linalg.cholesky(sigma_x + jitter * np.eye(sigma_x.shape[0]))
    return chol @ rng.standard_normal(sigma_x.shape[0])


def _drive_recursion(
    b: np.ndarray, a1: np.ndarray, shocks: np.ndarray, x0: np.ndarray
) -> np.ndarray:
    """Iterate ``x_t = B^{-1}(a1 x_{t-1} + e_t)`` over the columns of ``shocks``."""
    p, n = shocks.shape
    b_inv = np.linalg.solve(b, np.eye(p))
    trans = b_inv @ a1
    driven = b_inv @ shocks
    out = np.empty((p, n))
    x = np.asarray(x0, dtype=float)
    for t in range(n):
        x = trans @ x + driven[:, t]
        out[:, t] = x
    return out


def simulate(
    m: StructuralModel,
    t_len: int,
    seed: int,
    burn_in: int = 100,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> TimeSeries:
    """Draw ``t_len`` steps of the stationary process defined by ``m``.

    The recursion is ``x_t = B^{-1}(a1 x_{t-1} + e_t)`` with
    ``e_t ~ N(0, sigma^2 I)`` i.i.d.; the initial state is drawn from the
    stationary law and ``burn_in`` leading samples are discarded. A fixed seed
    gives bit-identical output.
    """
    _require_admissible(m, tol)
    t_len = int(t_len)
    if t_len < 2:
        raise DimensionError(f"t_len must be >= 2, got {t_len}")
    burn_in = int(burn_in)
    if burn_in < 0:
        raise DimensionError(f"burn_in must be >= 0, got {burn_in}")
    rng = np.random.default_rng(seed)
    rf = to_reduced_form(m, tol)
    x0 = _stationary_start(rf.phi, rf.sigma_u, rng)
    shocks = m.sigma * rng.standard_normal((m.p, burn_in + t_len))
    path = _drive_recursion(m.b, m.a1, shocks, x0)
    return TimeSeries(values=path[:, burn_in:], centered=False)


def gram_orthogonal_factor(
    c_mat: np.ndarray,
    d_mat: np.ndarray,
    lam: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Recover the orthogonal ``Q`` with ``D = sqrt(lam) Q C`` from matching Grams.

    Requires ``D^T D = lam * C^T C`` within 1e-8 relative Frobenius; returns
    ``Q = lam^{-1/2} D C^{-1}`` and verifies its orthogonality defect.
    """
    c = _check_square(c_mat, "c_mat")
    d = _check_square(d_mat, "d_mat")
    if c.shape != d.shape:
        raise DimensionError(f"shape mismatch: {c.shape} vs {d.shape}")
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0.0:
        raise FactorizationError(f"lambda must be positive, got {lam}")
    gram_c = lam * (c.T @ c)
    gram_d = d.T @ d
    denom = max(np.linalg.norm(gram_c, "fro"), np.finfo(float).tiny)
    mismatch = float(np.linalg.norm(gram_d - gram_c, "fro") / denom)
    if mismatch > 1e-8:
        raise FactorizationError(
            f"Gram mismatch {mismatch:.3e} exceeds 1e-8: D^T D != lambda * C^T C"
        )
    q = np.linalg.solve(c.T, d.T).T / math.sqrt(lam)
    defect = float(np.linalg.norm(q.T @ q - np.eye(q.shape[0]), "fro"))
    if defect > tol.orthogonality:
        raise FactorizationError(
            f"recovered factor has orthogonality defect {defect:.3e}"
        )
    return q
