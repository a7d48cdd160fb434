"""Decoherent non-unitary quantum walks and their skin-effect drift velocities."""

from skinwalk.errors import (
    DegenerateSpectrumError,
    InvalidParameterError,
    LatticeOverflowError,
    SkinwalkError,
    VanishingSurvivalError,
)
from skinwalk.walk import DampingOrder, WalkParams, build_coin, build_loss
from skinwalk.channels import (
    Classification,
    CompositeLossSet,
    KrausChannel,
    amplitude_damping,
    compose_damping_loss,
    dephasing_channel,
)
from skinwalk.evolution import (
    DriftEstimate,
    Trajectory,
    classical_markov_evolve,
    estimate_drift,
    evolve,
)
from skinwalk.spectral import (
    ClosedForms,
    IncoherentRegime,
    VelocityReport,
    closed_form_velocities,
    coherent_drift_spectral,
    crossover_gamma,
    incoherent_drift_spectral,
    quasienergy_bands,
)

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ClosedForms",
    "CompositeLossSet",
    "DampingOrder",
    "DegenerateSpectrumError",
    "DriftEstimate",
    "IncoherentRegime",
    "InvalidParameterError",
    "KrausChannel",
    "LatticeOverflowError",
    "SkinwalkError",
    "Trajectory",
    "VanishingSurvivalError",
    "VelocityReport",
    "WalkParams",
    "amplitude_damping",
    "build_coin",
    "build_loss",
    "classical_markov_evolve",
    "closed_form_velocities",
    "coherent_drift_spectral",
    "compose_damping_loss",
    "crossover_gamma",
    "dephasing_channel",
    "estimate_drift",
    "evolve",
    "incoherent_drift_spectral",
    "quasienergy_bands",
]
