"""Synthetic linear Gaussian dynamical system bandit and its Kalman oracles.

The environment has one latent component per grid configuration::

    z[t+1] = Gamma z[t] + xi[t],        xi[t] ~ N(0, Q)
    X[t]   = z[t][component(A[t])] + eta[t],  eta[t] ~ N(0, sigma2)

Besides sampling trajectories this module carries the ground-truth
machinery used to check the learner: the time-varying Kalman filter, the
per-action Riccati fixed points, the constant-gain ("modified") filter built
from a common covariance upper bound, and the exact coefficients mapping a
window of past rewards to that filter's prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from ._validation import check_index, check_square

MAX_STATE_DIM = 4096
SYSTEM_FORMAT = "hypercontroller.lgds"
SYSTEM_VERSION = 1


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LgdsParams:
    """Ground-truth system ``(Gamma, Q, sigma2)``.

    ``grid_shape`` fixes how configuration multi-indices map to state
    components (row-major); a flat system of size ``m`` uses ``(m,)``.
    """

    gamma: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    sigma2: float
    grid_shape: tuple[int, ...] = ()

    def __post_init__(self):
        gamma = check_square(self.gamma, "gamma")
        Q = check_square(self.Q, "Q")
        if Q.shape != gamma.shape:
            raise ValueError("gamma and Q must have the same shape")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        sigma2 = float(self.sigma2)
        if not np.isfinite(sigma2) or sigma2 < 0:
            raise ValueError("sigma2 must be a non-negative finite number")
        m = gamma.shape[0]
        if m > MAX_STATE_DIM:
            raise ValueError(f"state dimension {m} exceeds the supported maximum {MAX_STATE_DIM}")
        shape = tuple(self.grid_shape) or (m,)
        if int(np.prod(shape)) != m:
            raise ValueError(f"grid_shape {shape} does not have {m} cells")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "Q", (Q + Q.T) / 2)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "grid_shape", shape)

    @property
    def m(self) -> int:
        return self.gamma.shape[0]

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.gamma)

    def component(self, A) -> int:
        """State component observed when configuration ``A`` is applied."""
        if isinstance(A, (int, np.integer)) and len(self.grid_shape) == 1:
            A = (A,)
        return int(np.ravel_multi_index(check_index(A, self.grid_shape), self.grid_shape))

    def basis(self, A) -> np.ndarray:
        e = np.zeros(self.m)
        e[self.component(A)] = 1.0
        return e

    @cached_property
    def noise_factor(self) -> np.ndarray:
        """Symmetric square root of ``Q``."""
        return psd_sqrt(self.Q)

    @cached_property
    def stationary_cov(self) -> np.ndarray:
        """Solution of ``P = Gamma P Gamma^T + Q``."""
        return lyapunov(self.gamma, self.Q)

    def to_dict(self) -> dict:
        return {
            "format": SYSTEM_FORMAT,
            "version": SYSTEM_VERSION,
            "gamma": self.gamma.tolist(),
            "Q": self.Q.tolist(),
            "sigma2": self.sigma2,
            "grid_shape": list(self.grid_shape),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LgdsParams":
        if doc.get("format") != SYSTEM_FORMAT or doc.get("version") != SYSTEM_VERSION:
            raise ValueError("not a supported system document")
        return cls(np.asarray(doc["gamma"], float), np.asarray(doc["Q"], float), doc["sigma2"], tuple(doc["grid_shape"]))


@dataclass(frozen=True)
class LgdsState:
    z: np.ndarray
    t: int
    rng: np.random.Generator = field(repr=False)


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def psd_sqrt(M) -> np.ndarray:
    w, v = np.linalg.eigh((M + M.T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def lyapunov(gamma, Q) -> np.ndarray:
    P = solve_discrete_lyapunov(gamma, Q)
    return (P + P.T) / 2


def controllability_matrix(gamma, B) -> np.ndarray:
    blocks = [B]
    for _ in range(gamma.shape[0] - 1):
        blocks.append(gamma @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(gamma, Q) -> bool:
    """Rank test on ``(Q^1/2, Gamma Q^1/2, ..., Gamma^(m-1) Q^1/2)``."""
    m = gamma.shape[0]
    return int(np.linalg.matrix_rank(controllability_matrix(gamma, psd_sqrt(Q)))) == m


def generate_system(
    m: int,
    spectral_radius_target: float,
    process_noise: float = 1.0,
    measurement_noise: float = 1.0,
    seed=None,
    check_controllability: bool = True,
    grid_shape: tuple[int, ...] | None = None,
    max_draws: int = 100,
) -> LgdsParams:
    """Draw a random Schur system with controllable process noise.

    ``Gamma`` is a Gaussian matrix rescaled to the requested spectral
    radius; ``Q = process_noise**2 * M M^T / m`` for a Gaussian ``M``;
    ``sigma2 = measurement_noise**2``. Zero noise scales are accepted only
    with ``check_controllability=False`` (a degenerate, deterministic mode).
    """
    if not 0 < spectral_radius_target < 1:
        raise ValueError("spectral radius target must lie in (0, 1)")
    if m < 1 or m > MAX_STATE_DIM:
        raise ValueError(f"m must be in [1, {MAX_STATE_DIM}]")
    if process_noise < 0 or measurement_noise < 0:
        raise ValueError("noise scales must be non-negative")
    if check_controllability and process_noise == 0:
        raise ValueError("zero process noise is never controllable; pass check_controllability=False")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        gamma = rng.standard_normal((m, m)) / np.sqrt(m)
        rho = spectral_radius(gamma)
        if rho < 1e-8:
            continue
        gamma *= spectral_radius_target / rho
        M = rng.standard_normal((m, m))
        Q = process_noise**2 * (M @ M.T) / m
        if abs(spectral_radius(gamma) - spectral_radius_target) > 1e-6:
            continue
        if check_controllability and not is_controllable(gamma, Q):
            continue
        return LgdsParams(gamma, Q, measurement_noise**2, grid_shape or (m,))
    raise RuntimeError(f"no admissible system found in {max_draws} draws")


def initial_state(params: LgdsParams, seed=None, stationary: bool = True, z0=None) -> LgdsState:
    """Start a trajectory; by default ``z0 ~ N(0, stationary covariance)``."""
    rng = np.random.default_rng(seed)
    if z0 is not None:
        z = np.array(z0, dtype=float)
        if z.shape != (params.m,):
            raise ValueError(f"z0 must have shape ({params.m},)")
    elif stationary:
        z = psd_sqrt(params.stationary_cov) @ rng.standard_normal(params.m)
    else:
        z = np.zeros(params.m)
    return LgdsState(z, 0, rng)


def step(state: LgdsState, params: LgdsParams, A) -> tuple[LgdsState, float, np.ndarray]:
    """Apply configuration ``A`` for one iteration.

    Returns the advanced state, the noisy reward, and the noise-free
    component values ``z[t]`` (for regret accounting only). Noise draws do
    not depend on ``A``, so every policy sees the same latent trajectory for
    a given seed.
    """
    k = params.component(A)
    eta = state.rng.standard_normal()
    xi = state.rng.standard_normal(params.m)
    z = state.z
    reward = float(z[k] + np.sqrt(params.sigma2) * eta)
    z_next = params.gamma @ z + params.noise_factor @ xi
    return replace(state, z=z_next, t=state.t + 1), reward, z


def riccati_map(P, params: LgdsParams, e) -> np.ndarray:
    """One step of the filter Riccati recursion for observation vector ``e``.

    ``g(P, e) = Gamma P Gamma^T + Q - Gamma P e (e^T P e + sigma2)^-1 e^T P Gamma^T``
    """
    G = params.gamma
    Pe = P @ e
    denom = float(e @ Pe) + params.sigma2
    if denom <= 0:
        raise ZeroDivisionError("degenerate innovation variance e^T P e + sigma2 = 0")
    GPe = G @ Pe
    out = G @ P @ G.T + params.Q - np.outer(GPe, GPe) / denom
    return (out + out.T) / 2


dare_iterate = riccati_map


def solve_per_action_riccati(
    params: LgdsParams, A, P0=None, tol: float = 1e-10, max_iter: int = 100_000
) -> np.ndarray:
    """Fixed point ``P_A = g(P_A, e_A)`` by plain iteration from ``P0`` (default ``Q``)."""
    e = params.basis(A)
    P = params.Q.copy() if P0 is None else np.array(P0, dtype=float)
    for _ in range(max_iter):
        P_next = riccati_map(P, params, e)
        if np.max(np.abs(P_next - P)) < tol:
            return P_next
        P = P_next
    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} steps")


class ModifiedGains(NamedTuple):
    """Constant gains of the modified filter.

    ``L[:, k]`` is the gain used when component ``k`` is observed.
    """

    P_bar: np.ndarray
    L: np.ndarray


def covariance_upper_bound(params: LgdsParams, method: str = "lyapunov") -> np.ndarray:
    """A matrix dominating every per-action Riccati solution.

    ``"lyapunov"`` returns the stationary state covariance ``X = Gamma X
    Gamma^T + Q``. Because ``g(X, e) <= X`` for every ``e``, the gains built
    from it always give a Schur closed loop. ``"sum"`` returns the sum of all
    per-action fixed points; it also dominates each of them but carries no
    stability guarantee.
    """
    if method == "lyapunov":
        return params.stationary_cov.copy()
    if method == "sum":
        return sum(solve_per_action_riccati(params, k) for k in _components(params))
    raise ValueError(f"unknown bound method {method!r}")


def _components(params):
    return [np.unravel_index(k, params.grid_shape) for k in range(params.m)]


def modified_kalman_gains(params: LgdsParams, bound: str = "lyapunov", P_bar=None) -> ModifiedGains:
    """Gains ``L_A = P_bar e_A (e_A^T P_bar e_A + sigma2)^-1`` for every component."""
    P_bar = covariance_upper_bound(params, bound) if P_bar is None else np.asarray(P_bar, dtype=float)
    diag = np.diag(P_bar) + params.sigma2
    if np.any(diag <= 0):
        raise ZeroDivisionError("degenerate gain denominator")
    return ModifiedGains(P_bar, P_bar / diag[None, :])


def closed_loop(params: LgdsParams, gains: ModifiedGains, A) -> np.ndarray:
    """``Gamma - Gamma L_A e_A^T``."""
    k = params.component(A)
    F = params.gamma.copy()
    F[:, k] -= params.gamma @ gains.L[:, k]
    return F


class KalmanResult(NamedTuple):
    predictions: np.ndarray
    variances: np.ndarray
    P: np.ndarray
    z_hat: np.ndarray


def kalman_filter(params: LgdsParams, actions: Sequence, rewards: Sequence[float], P0=None) -> KalmanResult:
    """Time-varying Kalman one-step predictor from ``z_hat = 0``.

    Returns the predictions ``<e_A[t], z_hat[t|t-1]>``, their predicted
    innovation variances ``e^T P[t|t-1] e + sigma2``, and the final
    ``P`` and ``z_hat``. ``P0`` defaults to ``Q``.
    """
    if len(actions) != len(rewards):
        raise ValueError("actions and rewards must have equal length")
    G = params.gamma
    P = params.Q.copy() if P0 is None else np.array(P0, dtype=float)
    z_hat = np.zeros(params.m)
    n = len(actions)
    preds = np.empty(n)
    variances = np.empty(n)
    for t, (A, x) in enumerate(zip(actions, rewards)):
        k = params.component(A)
        preds[t] = z_hat[k]
        Pe = P[:, k]
        denom = Pe[k] + params.sigma2
        variances[t] = denom
        if denom > 0:
            K = Pe / denom
            z_hat = G @ (z_hat + K * (x - z_hat[k]))
            GPe = G @ Pe
            P = G @ P @ G.T + params.Q - np.outer(GPe, GPe) / denom
        else:
            z_hat = G @ z_hat
            P = G @ P @ G.T + params.Q
        P = (P + P.T) / 2
    return KalmanResult(preds, variances, P, z_hat)


def kalman_predict_sequence(params: LgdsParams, actions: Sequence, rewards: Sequence[float]) -> np.ndarray:
    return kalman_filter(params, actions, rewards).predictions


def true_G(params: LgdsParams, gains: ModifiedGains, action_history: Sequence, A) -> np.ndarray:
    """Exact coefficients of the modified filter's prediction of ``X[t]``.

    ``action_history`` lists the configurations applied at ``t-s, ..., t-1``
    (oldest first). The result is ordered the same way, so it multiplies the
    reward window ``(X[t-s], ..., X[t-1])`` directly. The coefficient of
    ``X[t-k]`` is ``e_A^T F[t-1] ... F[t-k+1] Gamma L[t-k]`` where
    ``F[j] = Gamma - Gamma L_{A[j]} e_{A[j]}^T`` (leftmost factor newest).
    """
    s = len(action_history)
    row = params.basis(A)
    coefs = np.empty(s)
    for k in range(1, s + 1):
        prev = action_history[s - k]
        coefs[s - k] = row @ params.gamma @ gains.L[:, params.component(prev)]
        row = row @ closed_loop(params, gains, prev)
    return coefs


def simulate(params: LgdsParams, actions: Sequence, seed=None, stationary: bool = True, z0=None):
    """Roll a trajectory for a fixed action sequence.

    Returns ``(rewards, states)`` with ``states[t] = z[t]``.
    """
    state = initial_state(params, seed, stationary=stationary, z0=z0)
    rewards = np.empty(len(actions))
    states = np.empty((len(actions), params.m))
    for t, A in enumerate(actions):
        state, rewards[t], states[t] = step(state, params, A)
    return rewards, states
