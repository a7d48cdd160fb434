"""
Momentum-space drift velocities.

Coherent walks decouple into 2x2 Bloch step operators ``U_k``; the drift is the
group velocity ``Re dE/dk`` of the quasienergy ``E = i ln u`` of the dominant
eigenvalue ``u``, taken where ``Im E`` is largest. Fully incoherent walks are
classical Markov chains whose Bloch transfer matrix ``T_k`` plays the same
role, with ``lambda = ln u`` and drift ``-Im dlambda/dk`` where ``Re lambda``
is largest.

Phase conventions: ``U_k = diag(e^{-ik}, e^{ik}) C M`` and
``T_k = diag(e^{-ik}, e^{ik}) |C|^2 W``. With these, both extraction rules
return positive velocities for transport toward ``+x``, matching the
real-space simulation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
from numpy.typing import NDArray

from skinwalk.errors import DegenerateSpectrumError, InvalidParameterError
from skinwalk.evolution import markov_weights
from skinwalk.walk import DampingOrder, WalkParams, build_coin, build_loss

__all__ = [
    "IncoherentRegime",
    "BandTable",
    "VelocityReport",
    "ClosedForms",
    "bloch_operator",
    "coherent_core",
    "markov_core",
    "bloch_operator_derivative",
    "markov_bloch",
    "quasienergy_bands",
    "quasienergy_derivative",
    "coherent_drift_spectral",
    "incoherent_drift_spectral",
    "closed_form_velocities",
    "crossover_gamma",
    "golden_section_max",
]

SCAN_POINTS = 1024
K_TOL = 1e-10
DIFF_STEP = 1e-6
TIE_TOL = 1e-12
DEGENERACY_TOL = 1e-10
NEAR_DEGENERATE_THETA = 1e-9


class IncoherentRegime(str, enum.Enum):
    DEPHASED = "dephased"
    DAMPED_AFTER_LOSS = "damped-after"
    DAMPED_BEFORE_LOSS = "damped-before"


@dataclass(frozen=True)
class VelocityReport:
    """
    Drift velocity of one parameter point from up to three routes.

    ``branch`` names the band (``"+"`` or ``"-"``) that dominates at ``k_star``;
    ``flags`` collects ``degenerate``, ``near-degenerate``, ``saturated`` and
    ``reversed`` markers.
    """

    regime: str
    gamma: float
    theta: float
    v_closed: Optional[float]
    v_spectral: Optional[float]
    v_realspace: Optional[float] = None
    k_star: Optional[float] = None
    branch: Optional[str] = None
    flags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ClosedForms:
    v_c: float
    v_inc: float
    v_inc_reversed: float
    degenerate: bool = False
    reversed: bool = False


@dataclass(frozen=True)
class BandTable:
    """
    Quasienergy bands on a k grid, tracked by continuity.

    ``e_plus``/``e_minus`` are complex arrays; ``degenerate`` marks grid points
    where the two eigenvalues coincide within 1e-10.
    """

    k: NDArray[np.float64]
    e_plus: NDArray[np.complex128]
    e_minus: NDArray[np.complex128]
    degenerate: NDArray[np.bool_]


def _phase(k) -> NDArray[np.complex128]:
    """Shift phases ``(e^{-ik}, e^{ik})``; vectorized over ``k``."""
    k = np.asarray(k, dtype=float)
    return np.stack([np.exp(-1j * k), np.exp(1j * k)], axis=-1)


def _family(core: NDArray, k) -> NDArray[np.complex128]:
    """``diag(e^{-ik}, e^{ik}) @ core``, stacked along a leading axis for array ``k``."""
    return _phase(k)[..., :, None] * core


def coherent_core(gamma: float, theta: float) -> NDArray[np.float64]:
    return build_coin(theta) @ build_loss(gamma)


def markov_core(gamma: float, theta: float, regime: IncoherentRegime) -> NDArray[np.float64]:
    return np.abs(build_coin(theta)) ** 2 @ _regime_weights(gamma, IncoherentRegime(regime))


def bloch_operator(k: float, gamma: float, theta: float) -> NDArray[np.complex128]:
    """Single-step operator of the coherent walk in the ``k`` sector."""
    return _family(coherent_core(gamma, theta), k)


def bloch_operator_derivative(k: float, gamma: float, theta: float) -> NDArray[np.complex128]:
    phases = _phase(k) * np.array([-1j, 1j])
    return phases[..., :, None] * coherent_core(gamma, theta)


def _regime_weights(gamma: float, regime: IncoherentRegime) -> NDArray[np.float64]:
    if regime is IncoherentRegime.DEPHASED:
        params = WalkParams(0.0, gamma, eta=1.0)
    elif regime is IncoherentRegime.DAMPED_AFTER_LOSS:
        params = WalkParams(0.0, gamma, mu=1.0, damping_order=DampingOrder.AFTER_LOSS)
    else:
        params = WalkParams(0.0, gamma, mu=1.0, damping_order=DampingOrder.BEFORE_LOSS)
    return markov_weights(params)


def markov_bloch(k: float, gamma: float, theta: float, regime: IncoherentRegime) -> NDArray[np.complex128]:
    """Bloch transfer matrix of the fully incoherent walk."""
    return _family(markov_core(gamma, theta, regime), k)


def _match(previous: NDArray, current: NDArray) -> NDArray:
    """Order ``current`` so each entry is nearest to the same slot of ``previous``."""
    straight = abs(current[0] - previous[0]) + abs(current[1] - previous[1])
    swapped = abs(current[1] - previous[0]) + abs(current[0] - previous[1])
    return current if straight <= swapped else current[::-1]


def _track(eigenvalues: NDArray) -> NDArray:
    """Reorder rows of ``(n, 2)`` eigenvalues into continuous branches."""
    out = np.empty_like(eigenvalues)
    out[0] = eigenvalues[0][np.argsort(-np.abs(eigenvalues[0]), kind="stable")]
    for i in range(1, len(eigenvalues)):
        out[i] = _match(out[i - 1], eigenvalues[i])
    return out


def quasienergy_bands(gamma: float, theta: float, k_grid: Sequence[float]) -> BandTable:
    """
    Quasienergies ``E = i ln u`` of ``U_k`` along a sorted grid.

    Eigenvalues are assigned to branches by nearest-neighbour matching from one
    grid point to the next, and ``Re E`` is unwrapped along the grid. At the
    first point ``E_+`` is the eigenvalue with the larger ``Im E``.
    """
    if not 0.0 <= gamma < 1.0:
        raise InvalidParameterError(f"band structure needs gamma in [0, 1), got {gamma!r}")
    ks = np.asarray(k_grid, dtype=float)
    if ks.ndim != 1 or ks.size == 0 or np.any(np.diff(ks) <= 0):
        raise InvalidParameterError("k_grid must be a nonempty, strictly increasing sequence")
    eig = _track(np.linalg.eigvals(_family(coherent_core(gamma, theta), ks)))
    degenerate = np.abs(eig[:, 0] - eig[:, 1]) < DEGENERACY_TOL
    im_e = np.log(np.abs(eig))
    re_e = np.unwrap(-np.angle(eig), axis=0)
    energies = re_e + 1j * im_e
    return BandTable(ks, energies[:, 0], energies[:, 1], degenerate)


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = K_TOL
) -> float:
    """Maximize a unimodal ``f`` on ``[lo, hi]`` until the bracket is shorter than ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _dominant(core: NDArray, k: float) -> complex:
    u = np.linalg.eigvals(_family(core, k))
    return complex(u[np.argmax(np.abs(u))])


def _scan_grid() -> NDArray[np.float64]:
    return -math.pi + 2.0 * math.pi * np.arange(SCAN_POINTS) / SCAN_POINTS


def _locate_k_star(core: NDArray) -> Tuple[float, bool, str]:
    """
    Quasimomentum maximizing the dominant eigenvalue modulus.

    Returns ``k_star``, whether the modulus is flat in ``k`` and the continuity
    label of the dominant branch. Near-ties on the scan are resolved toward
    smaller ``|k|``.
    """
    ks = _scan_grid()
    eig = _track(np.linalg.eigvals(_family(core, ks)))
    mods = np.abs(eig).max(axis=1)
    top = mods.max()
    flat = top - mods.min() <= TIE_TOL
    candidates = np.flatnonzero(mods >= top - TIE_TOL)
    best = candidates[np.lexsort((ks[candidates], np.abs(ks[candidates])))[0]]
    branch = "+" if abs(eig[best, 0]) >= abs(eig[best, 1]) else "-"
    k0 = float(ks[best])
    if flat:
        return k0, True, branch
    dk = 2.0 * math.pi / SCAN_POINTS
    k_star = golden_section_max(lambda k: abs(_dominant(core, k)), k0 - dk, k0 + dk)
    return k_star, False, branch


def _log_derivative(core: NDArray, k: float, h: float = DIFF_STEP) -> complex:
    """Branch-matched central difference of ``ln u`` for the dominant eigenvalue."""
    u0 = _dominant(core, k)
    if u0 == 0:
        raise DegenerateSpectrumError("dominant eigenvalue vanishes")
    plus, minus = np.linalg.eigvals(_family(core, np.array([k + h, k - h])))
    u_plus = plus[np.argmin(np.abs(plus - u0))]
    u_minus = minus[np.argmin(np.abs(minus - u0))]
    return complex((u_plus - u_minus) / (2.0 * h) / u0)


def quasienergy_derivative(
    k: float, gamma: float, theta: float, method: str = "difference"
) -> complex:
    """
    ``dE/dk`` of the dominant band at ``k``.

    ``method="difference"`` uses the branch-matched central difference,
    ``method="perturbative"`` the left/right eigenvector formula
    ``i <L|dU|R> / (u <L|R>)``.
    """
    if method == "difference":
        return 1j * _log_derivative(coherent_core(gamma, theta), k)
    if method == "perturbative":
        values, left, right = scipy.linalg.eig(bloch_operator(k, gamma, theta), left=True, right=True)
        i = int(np.argmax(np.abs(values)))
        l, r = left[:, i], right[:, i]
        d_u = (l.conj() @ bloch_operator_derivative(k, gamma, theta) @ r) / (l.conj() @ r)
        return complex(1j * d_u / values[i])
    raise InvalidParameterError(f"unknown derivative method {method!r}")


def _near_axis(theta: float) -> bool:
    quarter = math.pi / 2.0
    r = math.remainder(theta, quarter)
    return abs(r) < NEAR_DEGENERATE_THETA


def coherent_drift_spectral(gamma: float, theta: float) -> VelocityReport:
    """
    Coherent drift velocity from the dominant Bloch band.

    Raises
    ------
    DegenerateSpectrumError
        For ``gamma == 0`` (no dominant mode) or when every eigenvalue vanishes.
    """
    if not math.isfinite(theta):
        raise InvalidParameterError(f"theta must be finite, got {theta!r}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"gamma must lie in [0, 1], got {gamma!r}")
    if gamma == 0.0:
        raise DegenerateSpectrumError("gamma = 0: unitary walk has no dominant mode")
    if gamma == 1.0 and abs(math.cos(theta)) <= NEAR_DEGENERATE_THETA:
        raise DegenerateSpectrumError("gamma = 1 with a vertical coin: Bloch operator is nilpotent")
    flags = []
    if gamma == 1.0:
        flags.append("saturated")
    if _near_axis(theta):
        flags.append("near-degenerate")

    core = coherent_core(gamma, theta)
    k_star, _, branch = _locate_k_star(core)
    if abs(_dominant(core, k_star)) == 0.0:
        raise DegenerateSpectrumError("all Bloch eigenvalues vanish")
    velocity = float((1j * _log_derivative(core, k_star)).real)
    closed = closed_form_velocities(gamma, theta)
    return VelocityReport(
        regime="coherent",
        gamma=gamma,
        theta=theta,
        v_closed=closed.v_c,
        v_spectral=velocity,
        k_star=k_star,
        branch=branch,
        flags=tuple(flags),
    )


def incoherent_drift_spectral(
    gamma: float, theta: float, regime: IncoherentRegime = IncoherentRegime.DEPHASED
) -> VelocityReport:
    """
    Fully incoherent drift velocity from the Markov Bloch matrix.

    ``regime`` selects full dephasing, or full amplitude damping (``mu = 1``)
    placed after or before the loss.
    """
    regime = IncoherentRegime(regime)
    if not math.isfinite(theta):
        raise InvalidParameterError(f"theta must be finite, got {theta!r}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"gamma must lie in [0, 1], got {gamma!r}")
    closed = closed_form_velocities(gamma, theta)
    v_closed = {
        IncoherentRegime.DEPHASED: closed.v_inc,
        IncoherentRegime.DAMPED_AFTER_LOSS: closed.v_inc_reversed,
        IncoherentRegime.DAMPED_BEFORE_LOSS: math.cos(2.0 * theta),
    }[regime]
    flags = []
    if regime is IncoherentRegime.DEPHASED and gamma == 0.0:
        return VelocityReport(
            regime.value, gamma, theta, v_closed, v_spectral=0.0, k_star=0.0, flags=("degenerate",)
        )
    if gamma == 1.0:
        flags.append("saturated")
    if _near_axis(theta):
        flags.append("near-degenerate")

    core = markov_core(gamma, theta, regime)
    k_star, _, branch = _locate_k_star(core)
    velocity = float(-_log_derivative(core, k_star).imag)
    if velocity < 0:
        flags.append("reversed")
    return VelocityReport(
        regime=regime.value,
        gamma=gamma,
        theta=theta,
        v_closed=v_closed,
        v_spectral=velocity,
        k_star=k_star,
        branch=branch,
        flags=tuple(flags),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def closed_form_velocities(gamma: float, theta: float) -> ClosedForms:
    """
    Analytic drift velocities toward ``+x``.

    ``v_c`` is the coherent walk, ``v_inc`` the fully dephased walk and
    ``v_inc_reversed`` full amplitude damping applied after the loss. The
    last one changes sign when ``cos^2 theta < (1 - gamma) sin^2 theta``, which
    sets the ``reversed`` flag.
    """
    if not math.isfinite(theta):
        raise InvalidParameterError(f"theta must be finite, got {theta!r}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"gamma must lie in [0, 1], got {gamma!r}")
    cos, sin = math.cos(theta), math.sin(theta)
    cos2, sin2 = cos * cos, sin * sin
    root = math.sqrt(1.0 - gamma)
    v_c = _ratio((1.0 + root) * cos, math.sqrt(4.0 * root + (1.0 - root) ** 2 * cos2))
    v_inc = _ratio(gamma * cos2, math.sqrt(4.0 * (1.0 - gamma) * sin2 * sin2 + gamma**2 * cos2 * cos2))
    v_rev = _ratio(cos2 - (1.0 - gamma) * sin2, 1.0 - gamma * sin2)
    return ClosedForms(v_c, v_inc, v_rev, degenerate=gamma == 0.0, reversed=v_rev < 0)


def crossover_gamma(theta: float, tol: float = 1e-6, scan_points: int = 400) -> Optional[float]:
    """
    Loss strength where coherent and fully dephased drifts coincide.

    The difference ``v_c - v_inc`` is scanned on an interior grid of ``(0, 1)``
    and the first sign change is bisected to ``tol``. Returns ``None`` when no
    sign change is found.
    """
    if not 0.0 < theta < math.pi / 2.0:
        raise InvalidParameterError(f"theta must lie in (0, pi/2), got {theta!r}")

    def gap(g):
        forms = closed_form_velocities(g, theta)
        return forms.v_c - forms.v_inc

    grid = np.arange(1, scan_points) / scan_points
    values = np.array([gap(g) for g in grid])
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            return float(grid[i])
        if values[i] * values[i + 1] < 0:
            return float(scipy.optimize.bisect(gap, grid[i], grid[i + 1], xtol=tol / 2))
    return None
