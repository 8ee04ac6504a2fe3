"""First-order average gate fidelity of leaky multiqubit gates under Markovian noise."""

from importlib.metadata import PackageNotFoundError, version

from .analytic import (
    FidelityBudget,
    NoiseChannel,
    QuadratureSpec,
    assemble_budget,
    channel_coefficient,
    delta_f,
    delta_f_parallel,
    delta_f_projected,
    delta_f_subspace,
    imperfect_cz_budget,
)
from .gatelib import GateModel, build, cczs, iswap, parallel, rydberg_cz, transmon_cz
from .hilbert import SystemLayout, compose, embed, pauli_basis, project_cmp, trace_cmp
from .liouville import channel_tomography, haar_average_fidelity, haar_mc_fidelity, lindblad_evolve
from .propagator import HamiltonianSchedule, heisenberg_jump, propagator_at

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "FidelityBudget",
    "GateModel",
    "HamiltonianSchedule",
    "NoiseChannel",
    "QuadratureSpec",
    "SystemLayout",
    "assemble_budget",
    "build",
    "cczs",
    "channel_coefficient",
    "channel_tomography",
    "compose",
    "delta_f",
    "delta_f_parallel",
    "delta_f_projected",
    "delta_f_subspace",
    "embed",
    "haar_average_fidelity",
    "haar_mc_fidelity",
    "heisenberg_jump",
    "imperfect_cz_budget",
    "iswap",
    "lindblad_evolve",
    "parallel",
    "pauli_basis",
    "project_cmp",
    "propagator_at",
    "rydberg_cz",
    "trace_cmp",
    "transmon_cz",
]
