"""Simulation and reconstruction of polarization + time-bin encoded photon pairs.

Subpackages in dependency order: `hilbert` (states on the bin lattice),
`optics` (Jones elements, crystals, preparation compiler), `hom`
(two-photon interference projections), `experiment` (Poisson scan
synthesis and estimation), `tomography` (16-state reconstruction), `cli`.
"""

from . import cli, experiment, hilbert, hom, optics, tomography
from .hilbert import (
    DensityMatrix,
    PhotonState,
    StateAnnihilatedError,
    TimeBinLattice,
    Wavepacket,
    named_state,
)
from .optics import OpticalPipeline, apply_pipeline, compile_preparation, gate_matrix
from .hom import coincidence_ratio, fock_oracle_ratio, scan_trace
from .experiment import ScanConfig, default_delay_grid, extract_projections, sample_scan
from .tomography import (
    TomographyResult,
    bootstrap_errors,
    default_tomography_set,
    fidelity,
    linear_inversion,
    mle_reconstruct,
    simulate_counts,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "OpticalPipeline",
    "PhotonState",
    "ScanConfig",
    "StateAnnihilatedError",
    "TimeBinLattice",
    "TomographyResult",
    "Wavepacket",
    "apply_pipeline",
    "bootstrap_errors",
    "cli",
    "coincidence_ratio",
    "compile_preparation",
    "default_delay_grid",
    "default_tomography_set",
    "experiment",
    "extract_projections",
    "fidelity",
    "fock_oracle_ratio",
    "gate_matrix",
    "hilbert",
    "hom",
    "linear_inversion",
    "mle_reconstruct",
    "named_state",
    "optics",
    "sample_scan",
    "scan_trace",
    "simulate_counts",
    "tomography",
    "__version__",
]
