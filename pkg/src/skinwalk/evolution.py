"""
Multi-step propagation and center-of-mass drift.

Three propagators share one contract and cross-check each other:

- the pure-state path for coherent runs (``eta == mu == 0``),
- the full density-matrix path for any channel,
- a classical Markov chain on (site, coin) populations for the fully
  incoherent limits ``eta == 1`` or ``mu == 1``.

Distributions are renormalized by the survival probability after every step,
so each reported row is conditioned on the walker not having been lost.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from skinwalk.channels import compose_damping_loss, dephasing_channel
from skinwalk.errors import InvalidParameterError, VanishingSurvivalError
from skinwalk.walk import (
    DampingOrder,
    WalkParams,
    apply_branches,
    build_coin,
    build_loss,
    initial_density,
    initial_state,
    shift_density,
    shift_pure,
)

__all__ = [
    "Trajectory",
    "DriftMethod",
    "DriftEstimate",
    "step_branches",
    "evolve",
    "evolve_pure",
    "evolve_density",
    "iter_density",
    "classical_markov_evolve",
    "markov_weights",
    "estimate_drift",
    "default_window",
]

SURVIVAL_FLOOR = 1e-300


@dataclass(frozen=True)
class Trajectory:
    """
    Survival-conditioned walk history.

    Attributes
    ----------
    positions : ndarray, shape (n_sites,)
    distributions : ndarray, shape (steps + 1, n_sites)
        Row ``t`` is P(x, t), summing to one.
    survival : ndarray, shape (steps + 1,)
        Unconditioned probability that the walker is still present.
    method : str
        Propagator that produced the data: ``pure``, ``density`` or ``markov``.
    """

    positions: NDArray[np.int64]
    distributions: NDArray[np.float64]
    survival: NDArray[np.float64]
    method: str = "density"
    params: Optional[WalkParams] = field(default=None, compare=False)

    @property
    def steps(self) -> int:
        return self.distributions.shape[0] - 1

    @property
    def center_of_mass(self) -> NDArray[np.float64]:
        return self.distributions @ self.positions

    @property
    def variance(self) -> NDArray[np.float64]:
        mean = self.center_of_mass
        return self.distributions @ (self.positions.astype(float) ** 2) - mean**2


class DriftMethod(str, enum.Enum):
    LINEAR_FIT = "linear-fit"
    FINAL_DIFFERENCE = "final-difference"


@dataclass(frozen=True)
class DriftEstimate:
    velocity: float
    window: Tuple[int, int]
    residual: float
    method: DriftMethod = DriftMethod.LINEAR_FIT


def step_branches(params: WalkParams) -> List[Tuple[float, NDArray]]:
    """
    Weighted coin operators applied before the coin rotation in one step.

    The step is ``rho -> sum_i w_i (S C A_i) rho (S C A_i)^dagger`` with the
    returned ``(w_i, A_i)``.
    """
    loss = build_loss(params.gamma)
    if params.eta > 0:
        return [(w, loss @ k) for w, k in dephasing_channel(params.eta).weighted()]
    if params.damping_order is not DampingOrder.NONE:
        return [(1.0, m) for m in compose_damping_loss(params.gamma, params.mu, params.damping_order).operators]
    return [(1.0, loss.astype(complex))]


def _advance_survival(survival: float, norm: float) -> float:
    survival *= norm
    if not norm > 0 or survival < SURVIVAL_FLOOR:
        raise VanishingSurvivalError(f"survival probability fell to {survival:.3e}")
    return survival


def _finish(params, rows, survival, method) -> Trajectory:
    return Trajectory(
        positions=params.positions,
        distributions=np.array(rows),
        survival=np.array(survival),
        method=method,
        params=params,
    )


def evolve_pure(params: WalkParams) -> Trajectory:
    """Coherent evolution of the state vector."""
    if params.eta != 0 or params.mu != 0:
        raise InvalidParameterError("the pure-state path requires eta = mu = 0")
    step = build_coin(params.theta) @ build_loss(params.gamma)
    psi = initial_state(params)
    rows = [np.sum(np.abs(psi) ** 2, axis=1)]
    survival = [1.0]
    for _ in range(params.steps):
        psi = shift_pure(psi @ step.T)
        probs = np.sum(np.abs(psi) ** 2, axis=1)
        norm = probs.sum()
        survival.append(_advance_survival(survival[-1], norm))
        psi /= math.sqrt(norm)
        rows.append(probs / norm)
    return _finish(params, rows, survival, "pure")


def iter_density(params: WalkParams) -> Iterator[Tuple[NDArray[np.complex128], float]]:
    """
    Yield ``(rho_t, survival_t)`` for ``t = 0..steps``.

    ``rho_t`` is the unit-trace conditional density matrix of shape ``(2n, 2n)``.
    """
    n = params.n_sites
    coin = build_coin(params.theta)
    branches = [(w, coin @ a) for w, a in step_branches(params)]
    rho = initial_density(params)
    survival = 1.0
    yield rho, survival
    for _ in range(params.steps):
        rho4 = shift_density(apply_branches(rho.reshape(n, 2, n, 2), branches))
        rho = rho4.reshape(2 * n, 2 * n)
        norm = float(np.real(np.trace(rho)))
        survival = _advance_survival(survival, norm)
        rho = rho / norm
        yield rho, survival


def evolve_density(params: WalkParams) -> Trajectory:
    """Full density-matrix evolution for any channel configuration."""
    rows, survival = [], []
    n = params.n_sites
    for rho, surv in iter_density(params):
        pops = np.real(np.diagonal(rho)).reshape(n, 2).sum(axis=1)
        rows.append(pops)
        survival.append(surv)
    return _finish(params, rows, survival, "density")


def markov_weights(params: WalkParams) -> NDArray[np.float64]:
    """
    Population transfer of the loss/channel stage, ``W[c', c] = sum_i w_i |A_i[c', c]|^2``.

    Exact for coin-diagonal input, which is what the fully incoherent
    channels produce.
    """
    return sum(w * np.abs(a) ** 2 for w, a in step_branches(params))


def classical_markov_evolve(params: WalkParams) -> Trajectory:
    """
    Evolve (site, coin) populations as a classical Markov chain.

    Each step applies the loss/channel weights, the coin-flip probabilities
    ``|C[c', c]|^2`` and the deterministic shift.

    Raises
    ------
    InvalidParameterError
        Outside the fully incoherent regimes ``eta == 1`` or ``mu == 1``.
    """
    if not params.fully_incoherent:
        raise InvalidParameterError("the Markov path requires eta = 1 or mu = 1 with a damping order")
    transfer = np.abs(build_coin(params.theta)) ** 2 @ markov_weights(params)
    pops = np.abs(initial_state(params)) ** 2
    rows = [pops.sum(axis=1)]
    survival = [1.0]
    for _ in range(params.steps):
        pops = shift_pure(pops @ transfer.T)
        norm = pops.sum()
        survival.append(_advance_survival(survival[-1], norm))
        pops /= norm
        rows.append(pops.sum(axis=1))
    return _finish(params, rows, survival, "markov")


def evolve(params: WalkParams) -> Trajectory:
    """
    Propagate ``params.steps`` steps, choosing the cheapest exact path.

    Coherent runs use the state vector, fully incoherent runs the Markov chain,
    everything else the density matrix.
    """
    if params.eta == 0 and params.mu == 0:
        return evolve_pure(params)
    if params.fully_incoherent:
        return classical_markov_evolve(params)
    return evolve_density(params)


def default_window(steps: int) -> Tuple[int, int]:
    """Last third of the run, at least five points when available."""
    return max(0, steps - max(steps // 3, 4)), steps


def estimate_drift(
    traj: Trajectory,
    window: Optional[Tuple[int, int]] = None,
    method: DriftMethod = DriftMethod.LINEAR_FIT,
) -> DriftEstimate:
    """
    Drift velocity from the center-of-mass series.

    Parameters
    ----------
    traj : Trajectory
    window : (int, int), optional
        Inclusive step range of the least-squares fit; defaults to
        :func:`default_window`.
    method : DriftMethod
        ``LINEAR_FIT`` fits a line over the window; ``FINAL_DIFFERENCE`` returns
        ``n(T) - n(T-1)``.
    """
    method = DriftMethod(method)
    com = traj.center_of_mass
    steps = traj.steps
    if method is DriftMethod.FINAL_DIFFERENCE:
        if steps < 1:
            raise InvalidParameterError("final difference needs at least one step")
        return DriftEstimate(float(com[-1] - com[-2]), (steps - 1, steps), 0.0, method)

    start, stop = default_window(steps) if window is None else (int(window[0]), int(window[1]))
    if not 0 <= start < stop <= steps:
        raise InvalidParameterError(f"fit window {start}:{stop} outside [0, {steps}]")
    if stop - start + 1 < 3:
        raise InvalidParameterError("a linear fit needs at least 3 points")
    t = np.arange(start, stop + 1, dtype=float)
    y = com[start : stop + 1]
    slope, intercept = np.polyfit(t, y, 1)
    residual = math.sqrt(float(np.mean((y - (slope * t + intercept)) ** 2)))
    return DriftEstimate(float(slope), (start, stop), residual, method)
