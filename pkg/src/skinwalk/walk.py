"""
Lattice, step operators and single-step maps for the lossy quantum walk.

States live on the finite lattice x in [-half_width, half_width] with a
two-level coin. A pure state is an array of shape ``(n_sites, 2)`` and a
density matrix an array of shape ``(2 * n_sites, 2 * n_sites)``; flattening
either in C order gives the index ``2 * (x + half_width) + c``.

One step applies ``U = S C(theta) M``: the mode-selective loss ``M`` damps the
coin-1 amplitude by ``sqrt(1 - gamma)``, the real coin rotation ``C`` mixes the
two coin states and the shift ``S`` moves coin 0 to ``x + 1`` and coin 1 to
``x - 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from numpy.typing import NDArray

from skinwalk.errors import InvalidParameterError, LatticeOverflowError

if TYPE_CHECKING:
    from skinwalk.channels import KrausChannel

__all__ = [
    "DampingOrder",
    "WalkParams",
    "build_coin",
    "build_loss",
    "initial_coin",
    "initial_state",
    "initial_density",
    "step_pure",
    "step_density",
    "apply_branches",
    "shift_pure",
    "shift_density",
]

# Shift direction per coin state.
DISPLACEMENT = (1, -1)


class DampingOrder(str, enum.Enum):
    """Where amplitude damping sits relative to the loss operator."""

    NONE = "none"
    BEFORE_LOSS = "before"
    AFTER_LOSS = "after"


def _check_unit_interval(name: str, value: float) -> None:
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class WalkParams:
    """
    Physical knobs of a single run.

    Parameters
    ----------
    theta : float
        Coin rotation angle in radians.
    gamma : float
        Loss strength on coin 1, in [0, 1].
    eta : float
        Dephasing strength, in [0, 1].
    mu : float
        Amplitude-damping strength, in [0, 1].
    damping_order : DampingOrder
        Placement of amplitude damping relative to the loss operator.
    steps : int
        Number of walk steps T.
    half_width : int, optional
        Lattice half-width; defaults to ``max(steps, 1)``.
    """

    theta: float
    gamma: float = 0.0
    eta: float = 0.0
    mu: float = 0.0
    damping_order: DampingOrder = DampingOrder.NONE
    steps: int = 0
    half_width: Optional[int] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta):
            raise InvalidParameterError(f"theta must be finite, got {self.theta!r}")
        _check_unit_interval("gamma", self.gamma)
        _check_unit_interval("eta", self.eta)
        _check_unit_interval("mu", self.mu)
        object.__setattr__(self, "damping_order", DampingOrder(self.damping_order))
        if int(self.steps) != self.steps or self.steps < 0:
            raise InvalidParameterError(f"steps must be a nonnegative integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        if self.half_width is None:
            object.__setattr__(self, "half_width", max(self.steps, 1))
        if int(self.half_width) != self.half_width or self.half_width < 1:
            raise InvalidParameterError(f"half_width must be a positive integer, got {self.half_width!r}")
        object.__setattr__(self, "half_width", int(self.half_width))
        if self.half_width < self.steps:
            raise InvalidParameterError(
                f"half_width ({self.half_width}) must be >= steps ({self.steps})"
            )
        if self.eta > 0 and self.damping_order is not DampingOrder.NONE:
            raise InvalidParameterError("dephasing and amplitude damping cannot be combined in one run")
        if self.mu > 0 and self.damping_order is DampingOrder.NONE:
            raise InvalidParameterError("mu > 0 requires a damping order ('before' or 'after')")

    @property
    def n_sites(self) -> int:
        return 2 * self.half_width + 1

    @property
    def positions(self) -> NDArray[np.int64]:
        return np.arange(-self.half_width, self.half_width + 1)

    @property
    def fully_incoherent(self) -> bool:
        """True when the dynamics reduce to a classical Markov chain."""
        return self.eta == 1.0 or (self.mu == 1.0 and self.damping_order is not DampingOrder.NONE)


def build_coin(theta: float) -> NDArray[np.float64]:
    """Return the coin rotation ``exp(-i theta sigma_y)``, which is real."""
    if not math.isfinite(theta):
        raise InvalidParameterError(f"theta must be finite, got {theta!r}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def build_loss(gamma: float) -> NDArray[np.float64]:
    """Return the mode-selective loss ``diag(1, sqrt(1 - gamma))``."""
    _check_unit_interval("gamma", gamma)
    return np.diag([1.0, math.sqrt(1.0 - gamma)])


def initial_coin() -> NDArray[np.complex128]:
    """Coin state ``(|0> + i|1>) / sqrt(2)``."""
    return np.array([1.0, 1.0j]) / math.sqrt(2.0)


def initial_state(params: WalkParams) -> NDArray[np.complex128]:
    """Walker at the origin with the symmetric coin state."""
    psi = np.zeros((params.n_sites, 2), dtype=complex)
    psi[params.half_width] = initial_coin()
    return psi


def initial_density(params: WalkParams) -> NDArray[np.complex128]:
    psi = initial_state(params).reshape(-1)
    return np.outer(psi, psi.conj())


def shift_pure(psi: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Move coin 0 one site right and coin 1 one site left."""
    if psi[-1, 0] != 0 or psi[0, 1] != 0:
        raise LatticeOverflowError("walker support reaches the lattice boundary")
    out = np.zeros_like(psi)
    out[1:, 0] = psi[:-1, 0]
    out[:-1, 1] = psi[1:, 1]
    return out


def shift_density(rho4: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Apply ``S rho S^dagger`` to a density matrix viewed as ``(n, 2, n, 2)``."""
    if rho4[-1, 0, -1, 0] != 0 or rho4[0, 1, 0, 1] != 0:
        raise LatticeOverflowError("walker support reaches the lattice boundary")
    out = np.zeros_like(rho4)
    out[1:, 0, 1:, 0] = rho4[:-1, 0, :-1, 0]
    out[1:, 0, :-1, 1] = rho4[:-1, 0, 1:, 1]
    out[:-1, 1, 1:, 0] = rho4[1:, 1, :-1, 0]
    out[:-1, 1, :-1, 1] = rho4[1:, 1, 1:, 1]
    return out


def apply_branches(rho4: NDArray[np.complex128], branches) -> NDArray[np.complex128]:
    """
    Site-diagonal operator sum ``sum_i w_i B_i rho B_i^dagger``.

    Parameters
    ----------
    rho4 : ndarray, shape (n, 2, n, 2)
    branches : iterable of (float, ndarray)
        Weight and 2x2 coin operator for each branch; every operator acts as
        ``sum_x |x><x| (x) B``.
    """
    out = np.zeros_like(rho4)
    for weight, op in branches:
        if weight == 0:
            continue
        out += weight * np.einsum("ab,xbyc,dc->xayd", op, rho4, op.conj(), optimize=True)
    return out


def step_pure(psi: NDArray[np.complex128], params: WalkParams) -> NDArray[np.complex128]:
    """
    One coherent step ``|psi> -> S C M |psi>``.

    Raises
    ------
    InvalidParameterError
        If the parameters carry dephasing or damping.
    LatticeOverflowError
        If the shift would leave the lattice.
    """
    if params.eta != 0 or params.mu != 0:
        raise InvalidParameterError("pure-state stepping is coherent only (eta = mu = 0)")
    if psi.shape != (params.n_sites, 2):
        raise InvalidParameterError(f"state shape {psi.shape} does not match lattice ({params.n_sites}, 2)")
    step = build_coin(params.theta) @ build_loss(params.gamma)
    return shift_pure(psi @ step.T)


def step_density(
    rho: NDArray[np.complex128],
    params: WalkParams,
    channel: Optional["KrausChannel"] = None,
    order: Optional[DampingOrder] = None,
) -> NDArray[np.complex128]:
    """
    One step of the density matrix, ``rho -> sum_i w_i (S C A_i) rho (S C A_i)^dagger``.

    The channel operators ``K_i`` are composed with the loss as ``A_i = M K_i``
    unless the order is ``AFTER_LOSS``, in which case ``A_i = K_i M``. Without a
    channel the step is the plain non-unitary ``U rho U^dagger``.

    Parameters
    ----------
    rho : ndarray, shape (2n, 2n)
    params : WalkParams
    channel : KrausChannel, optional
    order : DampingOrder, optional
        Overrides ``params.damping_order``.
    """
    dim = 2 * params.n_sites
    if rho.shape != (dim, dim):
        raise InvalidParameterError(f"density matrix shape {rho.shape} does not match lattice ({dim}, {dim})")
    order = params.damping_order if order is None else DampingOrder(order)
    loss = build_loss(params.gamma)
    coin = build_coin(params.theta)
    if channel is None:
        branches = [(1.0, coin @ loss)]
    elif order is DampingOrder.AFTER_LOSS:
        branches = [(w, coin @ k @ loss) for w, k in channel.weighted()]
    else:
        branches = [(w, coin @ loss @ k) for w, k in channel.weighted()]
    rho4 = rho.reshape(params.n_sites, 2, params.n_sites, 2)
    return shift_density(apply_branches(rho4, branches)).reshape(dim, dim)
