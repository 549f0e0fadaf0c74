from __future__ import annotations

import numpy as np

from envarkit import StructuralModel, is_admissible


def random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal draw via QR with sign fix."""
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_rotation(p: int, rng: np.random.Generator) -> np.ndarray:
    q = random_orthogonal(p, rng)
    if np.linalg.det(q) < 0:
        q = q.copy()
        q[:, 0] = -q[:, 0]
    return q


def random_admissible(
    p: int,
    rng: np.random.Generator,
    sigma_range: tuple[float, float] = (0.5, 2.0),
    normalized: bool = True,
) -> StructuralModel:
    """Random admissible model with contemporaneous radius <= 0.7 and stable phi."""
    for _ in range(100):
        a0 = rng.normal(0.0, 0.4, (p, p))
        if normalized:
            np.fill_diagonal(a0, 0.0)
        rho0 = max(np.abs(np.linalg.eigvals(a0)).max(), 1e-12)
        if rho0 > 0.7:
            a0 *= 0.7 / rho0
        a1 = rng.normal(0.0, 0.4, (p, p))
        b = np.eye(p) - a0
        phi = np.linalg.solve(b, a1)
        rho = np.abs(np.linalg.eigvals(phi)).max()
        if rho > 0.9:
            a1 *= 0.85 / rho
        m = StructuralModel(a0=a0, a1=a1, sigma=float(rng.uniform(*sigma_range)))
        if is_admissible(m):
            return m
    raise RuntimeError("could not draw an admissible model")
