"""
Coin-space decoherence channels.

Every channel here is position independent, so it is stored as a list of
2x2 coin operators and lifted site-diagonally when applied. A channel acts as
``rho -> sum_i w_i K_i rho K_i^dagger``; Kraus-sum channels carry unit weights,
mixture channels (dephasing) carry probabilities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from skinwalk.errors import InvalidParameterError
from skinwalk.walk import DampingOrder, _check_unit_interval, build_loss

__all__ = [
    "Classification",
    "KrausChannel",
    "CompositeLossSet",
    "dephasing_channel",
    "amplitude_damping",
    "compose_damping_loss",
    "apply_coin_channel",
    "PAULI_Z",
    "COIN_PROJECTORS",
]

PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
COIN_PROJECTORS = (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex))
LOWERING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|

COMPLETENESS_TOL = 1e-12


class Classification(str, enum.Enum):
    TRACE_PRESERVING = "trace-preserving"
    TRACE_NONINCREASING = "trace-nonincreasing"


def _classify(ops: Sequence[NDArray], weights: Sequence[float]) -> Classification:
    total = sum(w * k.conj().T @ k for w, k in zip(weights, ops))
    if np.max(np.abs(total - np.eye(2))) <= COMPLETENESS_TOL:
        return Classification.TRACE_PRESERVING
    return Classification.TRACE_NONINCREASING


@dataclass(frozen=True)
class KrausChannel:
    """
    Site-diagonal coin channel.

    Attributes
    ----------
    operators : tuple of ndarray
        2x2 coin operators.
    weights : tuple of float or None
        Mixture probabilities; ``None`` means a plain Kraus sum.
    classification : Classification
    """

    operators: Tuple[NDArray[np.complex128], ...]
    weights: Optional[Tuple[float, ...]] = None
    classification: Classification = Classification.TRACE_PRESERVING

    @classmethod
    def from_operators(cls, operators, weights=None) -> "KrausChannel":
        ops = tuple(np.asarray(k, dtype=complex) for k in operators)
        if any(k.shape != (2, 2) for k in ops):
            raise InvalidParameterError("channel operators must be 2x2 coin matrices")
        if weights is not None:
            weights = tuple(float(w) for w in weights)
            if len(weights) != len(ops) or any(w < 0 for w in weights):
                raise InvalidParameterError("weights must be nonnegative, one per operator")
        ws = weights if weights is not None else (1.0,) * len(ops)
        return cls(ops, weights, _classify(ops, ws))

    def weighted(self) -> Iterator[Tuple[float, NDArray[np.complex128]]]:
        ws = self.weights if self.weights is not None else (1.0,) * len(self.operators)
        return zip(ws, self.operators)

    def completeness(self) -> NDArray[np.complex128]:
        """Return ``sum_i w_i K_i^dagger K_i``."""
        return sum(w * k.conj().T @ k for w, k in self.weighted())

    def projector_form(self) -> "KrausChannel":
        """
        Rewrite a dephasing mixture ``{1: 1 - eta/2, sigma_z: eta/2}`` as the
        projector mixture ``(1 - eta) * id + eta * {K_0, K_1}``.
        """
        ops = self.operators
        if (
            self.weights is None
            or len(ops) != 2
            or not np.allclose(ops[0], np.eye(2))
            or not np.allclose(ops[1], PAULI_Z)
        ):
            raise InvalidParameterError("projector form exists only for dephasing mixtures")
        eta = 2.0 * self.weights[1]
        return KrausChannel.from_operators(
            (np.eye(2), *COIN_PROJECTORS), (1.0 - eta, eta, eta)
        )

    def apply(self, rho: NDArray[np.complex128]) -> NDArray[np.complex128]:
        return apply_coin_channel(rho, self)


def apply_coin_channel(rho: NDArray[np.complex128], channel: KrausChannel) -> NDArray[np.complex128]:
    """
    Apply a coin channel site-diagonally to a density matrix.

    ``rho`` may be a bare 2x2 coin matrix or a full ``(2n, 2n)`` lattice matrix.
    """
    n = rho.shape[0] // 2
    if rho.shape != (2 * n, 2 * n):
        raise InvalidParameterError(f"expected a square matrix of even size, got {rho.shape}")
    rho4 = rho.reshape(n, 2, n, 2)
    out = np.zeros(rho4.shape, dtype=complex)
    for w, k in channel.weighted():
        out += w * np.einsum("ab,xbyc,dc->xayd", k, rho4, k.conj())
    return out.reshape(rho.shape)


def dephasing_channel(eta: float) -> KrausChannel:
    """
    Coin dephasing of strength ``eta`` in mixture form.

    The identity is kept with probability ``1 - eta/2`` and ``sigma_z`` applied
    with probability ``eta/2``. Use :meth:`KrausChannel.projector_form` for the
    equivalent projector mixture.
    """
    _check_unit_interval("eta", eta)
    return KrausChannel.from_operators((np.eye(2), PAULI_Z), (1.0 - eta / 2.0, eta / 2.0))


def amplitude_damping(mu: float) -> KrausChannel:
    """Amplitude damping toward coin 0: ``{diag(1, sqrt(1-mu)), sqrt(mu)|0><1|}``."""
    _check_unit_interval("mu", mu)
    k0 = np.diag([1.0, math.sqrt(1.0 - mu)]).astype(complex)
    k1 = math.sqrt(mu) * LOWERING
    return KrausChannel.from_operators((k0, k1))


@dataclass(frozen=True)
class CompositeLossSet:
    """Damping Kraus operators fused with the loss, ``M K_i`` or ``K_i M``."""

    operators: Tuple[NDArray[np.complex128], ...]
    order: DampingOrder

    def total_loss(self) -> NDArray[np.complex128]:
        """
        ``sum_i M_i^dagger M_i``.

        Equals ``diag(1, 1 - gamma)`` after the loss and
        ``diag(1, (1 - gamma)(1 - mu) + mu)`` before it, where damped coin-1
        population is moved to coin 0 ahead of the loss and escapes it.
        """
        return sum(m.conj().T @ m for m in self.operators)


def compose_damping_loss(gamma: float, mu: float, order: DampingOrder) -> CompositeLossSet:
    """
    Fuse amplitude damping with the loss operator.

    ``BEFORE_LOSS`` gives ``M_i = M K_i`` and ``AFTER_LOSS`` gives ``M_i = K_i M``.
    Both share the diagonal operator ``diag(1, sqrt((1-gamma)(1-mu)))``; the
    transfer operator is ``sqrt(mu)|0><1|`` before and ``sqrt(mu(1-gamma))|0><1|``
    after the loss.
    """
    order = DampingOrder(order)
    if order is DampingOrder.NONE:
        raise InvalidParameterError("damping order must be 'before' or 'after'")
    loss = build_loss(gamma)
    kraus = amplitude_damping(mu).operators
    if order is DampingOrder.BEFORE_LOSS:
        ops = tuple(loss @ k for k in kraus)
    else:
        ops = tuple(k @ loss for k in kraus)
    return CompositeLossSet(ops, order)
