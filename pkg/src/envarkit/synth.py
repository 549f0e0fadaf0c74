"""Synthetic ground-truth generation for the benchmark protocol.

Supports of the contemporaneous and lagged matrices are independent
Erdos-Renyi draws, weights are uniform, and both the contemporaneous matrix and
the induced transition matrix are rescaled under a spectral-radius cap. The
heteroscedasticity knob draws per-node noise standard deviations around a
nominal value; at ``sigma_std = 0`` the equal-variance setting is recovered
exactly. Instances are fully determined by ``(seed, episode)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeding import sub_rng
from .errors import DimensionError, GenerationError
from .model_core import (
    ReducedForm,
    StructuralModel,
    TimeSeries,
    _drive_recursion,
    _freeze,
    _stationary_start,
    spectral_radius,
)

BURN_IN = 100
_MAX_SUPPORT_RETRIES = 20
_MAX_RESCALINGS = 100
# keep a hair inside the cap so rescaling never lands exactly on the boundary
_RESCALE_SLACK = 0.999
_SIGMA_FLOOR_FRACTION = 0.05
_INVERTIBILITY_RTOL = 1e-10


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator hyperparameters for one benchmark cell."""

    p: int
    t_len: int
    edge_prob: float = 0.3
    weight_low: float = -1.0
    weight_high: float = 1.0
    spectral_cap: float = 0.85
    sigma_nom: float = 1.0
    sigma_std: float = 0.0
    seed: int = 0
    episodes: int = 5

    def __post_init__(self):
        if self.p < 1 or self.t_len < 2:
            raise DimensionError("need p >= 1 and t_len >= 2")
        if not (0.0 <= self.edge_prob <= 1.0):
            raise DimensionError(f"edge_prob must be in [0, 1], got {self.edge_prob}")
        if not self.weight_low < self.weight_high:
            raise DimensionError("need weight_low < weight_high")
        if not (0.0 < self.spectral_cap < 1.0):
            raise DimensionError(f"spectral_cap must be in (0, 1), got {self.spectral_cap}")
        if self.sigma_nom <= 0.0 or self.sigma_std < 0.0:
            raise DimensionError("need sigma_nom > 0 and sigma_std >= 0")
        if self.episodes < 1:
            raise DimensionError("episodes must be >= 1")


@dataclass(frozen=True)
class GroundTruthInstance:
    """A generated model, its per-node noise scales, and one simulated episode.

    ``series`` is None for instances rebuilt from a persisted truth record in
    score-only contexts; the generator always fills it.
    """

    model: StructuralModel
    per_node_sigmas: np.ndarray
    series: TimeSeries | None
    episode_index: int

    def __post_init__(self):
        object.__setattr__(self, "per_node_sigmas", _freeze(self.per_node_sigmas))

    @property
    def sigma_u(self) -> np.ndarray:
        """Residual covariance of the generating law (heteroscedastic-aware)."""
        p = self.model.p
        b_inv = np.linalg.solve(self.model.b, np.eye(p))
        out = b_inv @ np.diag(self.per_node_sigmas**2) @ b_inv.T
        return 0.5 * (out + out.T)

    @property
    def phi(self) -> np.ndarray:
        return np.linalg.solve(self.model.b, self.model.a1)


def _draw_structure(cfg: GeneratorConfig, rng: np.random.Generator):
    """One support + weight draw, rescaled under the spectral cap.

    Returns ``(a0, a1)`` or None when ``I - a0`` is numerically singular.
    """
    p = cfg.p
    support0 = rng.random((p, p)) < cfg.edge_prob
    np.fill_diagonal(support0, False)
    support1 = rng.random((p, p)) < cfg.edge_prob
    weights0 = rng.uniform(cfg.weight_low, cfg.weight_high, size=(p, p))
    weights1 = rng.uniform(cfg.weight_low, cfg.weight_high, size=(p, p))
    a0 = np.where(support0, weights0, 0.0)
    a1 = np.where(support1, weights1, 0.0)

    rho0 = spectral_radius(a0)
    if rho0 > cfg.spectral_cap:
        a0 = a0 * (cfg.spectral_cap / rho0 * _RESCALE_SLACK)
    b = np.eye(p) - a0
    svals = np.linalg.svd(b, compute_uv=False)
    if svals[-1] <= _INVERTIBILITY_RTOL * svals[0]:
        return None
    for _ in range(_MAX_RESCALINGS):
        phi = np.linalg.solve(b, a1)
        rho = spectral_radius(phi)
        if rho <= cfg.spectral_cap:
            break
        a1 = a1 * (cfg.spectral_cap / rho * _RESCALE_SLACK)
    else:
        return None
    return a0, a1


def generate_instance(
    cfg: GeneratorConfig, episode: int, graph_episode: int | None = None
) -> GroundTruthInstance:
    """Generate the ground truth and series for one episode.

    ``graph_episode`` pins the structure draw to another episode's stream so a
    fixed graph can be replayed with fresh noise; by default each episode draws
    a fresh graph. Output is deterministic in ``(seed, episode)``.
    """
    episode = int(episode)
    g_episode = episode if graph_episode is None else int(graph_episode)
    for attempt in range(_MAX_SUPPORT_RETRIES):
        rng_graph = sub_rng(cfg.seed, 0x677261, g_episode, attempt)
        drawn = _draw_structure(cfg, rng_graph)
        if drawn is None:
            continue
        a0, a1 = drawn

        rng_noise = sub_rng(cfg.seed, 0x6E6F69, episode, attempt)
        z = rng_noise.standard_normal(cfg.p)
        sigmas = np.maximum(
            cfg.sigma_nom + cfg.sigma_std * z,
            _SIGMA_FLOOR_FRACTION * cfg.sigma_nom,
        )

        b = np.eye(cfg.p) - a0
        phi = np.linalg.solve(b, a1)
        b_inv = np.linalg.solve(b, np.eye(cfg.p))
        sigma_u = b_inv @ np.diag(sigmas**2) @ b_inv.T
        sigma_u = 0.5 * (sigma_u + sigma_u.T)
        x0 = _stationary_start(phi, sigma_u, rng_noise)
        shocks = sigmas[:, None] * rng_noise.standard_normal(
            (cfg.p, BURN_IN + cfg.t_len)
        )
        path = _drive_recursion(b, a1, shocks, x0)
        return GroundTruthInstance(
            model=StructuralModel(a0=a0, a1=a1, sigma=cfg.sigma_nom),
            per_node_sigmas=sigmas,
            series=TimeSeries(values=path[:, BURN_IN:], centered=False),
            episode_index=episode,
        )
    raise GenerationError(
        f"could not draw an invertible structure in {_MAX_SUPPORT_RETRIES} attempts "
        f"(p={cfg.p}, edge_prob={cfg.edge_prob})"
    )


BENCHMARK_P_VALUES = (5, 10, 15, 25, 50, 75, 100)
BENCHMARK_SIGMA_STD_VALUES = (0.00, 0.025, 0.075, 0.10, 0.15)
BENCHMARK_T_LEN = 1000
BENCHMARK_EPISODES = 5


def default_benchmark_grid(seed: int = 0) -> list[GeneratorConfig]:
    """The full benchmark grid: 7 dimensions x 5 heteroscedasticity levels."""
    grid = []
    for p in BENCHMARK_P_VALUES:
        for sigma_std in BENCHMARK_SIGMA_STD_VALUES:
            grid.append(
                GeneratorConfig(
                    p=p,
                    t_len=BENCHMARK_T_LEN,
                    sigma_std=sigma_std,
                    seed=seed,
                    episodes=BENCHMARK_EPISODES,
                )
            )
    return grid


def check_instance(inst: GroundTruthInstance, cfg: GeneratorConfig) -> None:
    """Invariant self-check: support, stability cap, and a valid generating law."""
    if np.max(np.abs(np.diag(inst.model.a0))) != 0.0:
        raise GenerationError("contemporaneous matrix has nonzero diagonal")
    if spectral_radius(inst.model.a0) > cfg.spectral_cap + 1e-12:
        raise GenerationError("contemporaneous spectral radius exceeds the cap")
    if spectral_radius(inst.phi) > cfg.spectral_cap + 1e-12:
        raise GenerationError("transition spectral radius exceeds the cap")
    if cfg.sigma_std == 0.0 and np.any(inst.per_node_sigmas != cfg.sigma_nom):
        raise GenerationError("equal-variance setting must give identical noise scales")
    ReducedForm(phi=inst.phi, sigma_u=inst.sigma_u)
