"""Two-photon interference of an encoded photon against a prepared ancilla.

The encoded photon and the ancilla meet on a balanced beam splitter; the
coincidence rate between the output ports, normalized to its long-delay
value, dips by the squared overlap of the two single-photon states.  With
an interference visibility v the dip ratio is

    R(delta) = 1 - v * <psi_a(delta)| rho_e |psi_a(delta)>

where psi_a(delta) is the ancilla delayed by delta, including the Gaussian
envelope overlap factors between displaced bins.  Positive delta delays the
ancilla.

fock_oracle_ratio recomputes R by brute force in the two-photon Fock space
(explicit beam-splitter expansion over an orthonormalized mode basis) and
exists purely as a cross-check of the closed-form path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, PhotonState, Wavepacket

RATIO_TOL = 1e-12
_MODE_CAP = 32


@dataclass(frozen=True)
class VisibilityModel:
    """Interference visibility; scales the dip depth only."""

    v: float

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.v}")


def _as_visibility(vis) -> VisibilityModel:
    if isinstance(vis, VisibilityModel):
        return vis
    return VisibilityModel(float(vis))


@dataclass(frozen=True)
class ProjectionResult:
    """One point of a dip scan: R = 1 - overlap_probability."""

    delay: float
    overlap_probability: float
    ratio: float

    def __post_init__(self):
        if not 0.0 <= self.overlap_probability <= 1.0:
            raise ValueError("overlap probability outside [0, 1]")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("coincidence ratio outside [0, 1]")
        if abs(self.ratio - (1.0 - self.overlap_probability)) > RATIO_TOL:
            raise ValueError("ratio and overlap probability are inconsistent")


def envelope_overlap(packet: Wavepacket, dt: float) -> float:
    """Amplitude overlap of two identical Gaussian envelopes displaced by dt.

    For the amplitude profile f(t) proportional to exp(-t^2 / (4 sigma_t^2))
    the normalized overlap integral is exp(-dt^2 / (8 sigma_t^2)): equal to 1
    at dt = 0, symmetric, and monotone decreasing in |dt|.
    """
    x = dt / packet.sigma_t
    return float(np.exp(-0.125 * x * x))


def _require_shared_envelope(encoded, ancilla) -> None:
    if encoded.lattice.tau != ancilla.lattice.tau:
        raise ValueError("encoded and ancilla must share the lattice spacing tau")
    if encoded.packet != ancilla.packet:
        raise ValueError("encoded and ancilla must share the wavepacket envelope")


def shifted_ancilla_vector(
    ancilla: PhotonState, delay: float, target_bin_count: int
) -> np.ndarray:
    """Effective amplitudes of the delayed ancilla on a target bin grid.

    g[p, j] = sum_k a[p, k] * envelope_overlap(delay + (k - j) tau), so that
    <e|g> is the two-photon interference overlap for any encoded amplitudes e
    on the same grid.  The bin counts of the two photons may differ.
    """
    tau = ancilla.lattice.tau
    amps = ancilla.as_matrix()
    k = np.arange(ancilla.bin_count)
    j = np.arange(target_bin_count)
    dt = delay + (k[None, :] - j[:, None]) * tau  # (target_bins, ancilla_bins)
    env = np.exp(-0.125 * (dt / ancilla.packet.sigma_t) ** 2)
    return (amps @ env.T).reshape(-1)


def state_overlap_at_delay(
    encoded: PhotonState, ancilla: PhotonState, delay: float
) -> complex:
    """Complex interference overlap between the encoded photon and the
    delayed ancilla.  Reduces to hilbert.inner_product at delay 0 when the
    bins are well resolved."""
    _require_shared_envelope(encoded, ancilla)
    g = shifted_ancilla_vector(ancilla, delay, encoded.bin_count)
    return complex(np.vdot(encoded.amplitudes, g))


def coincidence_ratio(
    encoded: PhotonState | DensityMatrix,
    ancilla: PhotonState,
    delay: float,
    vis: VisibilityModel | float = 1.0,
) -> ProjectionResult:
    """Normalized coincidence ratio R(delay) of a dip scan.

    The encoded input may be pure or mixed; the ancilla is always a prepared
    pure state.  The raw overlap is clamped to [0, 1]: envelope tails between
    adjacent bins can push the bilinear form past 1 by O(envelope_overlap
    (tau)^2), which is far below 1e-12 for resolvable bins.
    """
    _require_shared_envelope(encoded, ancilla)
    v = _as_visibility(vis).v
    g = shifted_ancilla_vector(ancilla, delay, encoded.bin_count)
    if isinstance(encoded, DensityMatrix):
        raw = float(np.real(np.vdot(g, encoded.matrix @ g)))
    else:
        raw = float(abs(np.vdot(encoded.amplitudes, g)) ** 2)
    overlap = v * min(max(raw, 0.0), 1.0)
    return ProjectionResult(delay=float(delay), overlap_probability=overlap, ratio=1.0 - overlap)


def scan_trace(
    encoded: PhotonState | DensityMatrix,
    ancilla: PhotonState,
    delays,
    vis: VisibilityModel | float = 1.0,
) -> list[ProjectionResult]:
    """Evaluate the dip ratio over a delay grid.  Points are independent and
    returned in grid order."""
    grid = np.asarray(delays, dtype=float)
    if grid.size == 0:
        raise ValueError("delay grid must not be empty")
    return [coincidence_ratio(encoded, ancilla, float(d), vis) for d in grid]


# ---------------------------------------------------------------------------
# Fock-space oracle
# ---------------------------------------------------------------------------


def fock_oracle_ratio(
    encoded: PhotonState,
    ancilla: PhotonState,
    delay: float,
    vis: VisibilityModel | float = 1.0,
    mode_cap: int = _MODE_CAP,
) -> float:
    """Coincidence ratio from an explicit two-photon Fock computation.

    Builds the exact Gram matrix of every Gaussian temporal mode involved
    (encoded bins at j tau, ancilla bins at k tau + delay), orthonormalizes
    it, sends each photon through a balanced beam splitter, and enumerates
    two-photon Fock amplitudes over (port, mode) to get the coincidence
    probability.  Imperfect visibility enters as an extra ancilla mode
    component orthogonal to everything, with weight 1 - v.  The result is
    normalized by the distinguishable-photon limit 1/2.
    """
    _require_shared_envelope(encoded, ancilla)
    v = _as_visibility(vis).v
    for state in (encoded, ancilla):
        if 2 * state.bin_count > mode_cap:
            raise ValueError(
                f"state needs {2 * state.bin_count} modes, above the cap {mode_cap}"
            )

    tau = encoded.lattice.tau
    sigma = encoded.packet.sigma_t
    # (polarization, arrival time) of every temporal mode, encoded arm first.
    pols = []
    times = []
    for p in range(2):
        for j in range(encoded.bin_count):
            pols.append(p)
            times.append(j * tau)
    n_enc = len(pols)
    for p in range(2):
        for k in range(ancilla.bin_count):
            pols.append(p)
            times.append(k * tau + delay)
    pols_arr = np.array(pols)
    times_arr = np.array(times)

    same_pol = pols_arr[:, None] == pols_arr[None, :]
    dt = times_arr[:, None] - times_arr[None, :]
    gram = same_pol * np.exp(-0.125 * (dt / sigma) ** 2)

    evals, evecs = np.linalg.eigh(gram)
    keep = evals > 1e-12 * evals.max()
    coords = (np.sqrt(evals[keep])[:, None]) * evecs[:, keep].conj().T

    e_full = np.concatenate([encoded.as_matrix()[0], encoded.as_matrix()[1]])
    a_full = np.concatenate([ancilla.as_matrix()[0], ancilla.as_matrix()[1]])
    phi = coords[:, :n_enc] @ e_full
    chi = coords[:, n_enc:] @ a_full
    phi = phi / np.linalg.norm(phi)
    chi = chi / np.linalg.norm(chi)

    # Mode-mismatch model of visibility: a fraction 1 - v of the ancilla
    # amplitude sits in a mode no other photon occupies.
    phi = np.append(phi, 0.0)
    chi = np.append(np.sqrt(v) * chi, np.sqrt(1.0 - v))

    # Balanced beam splitter: arm 1 -> (c + d)/sqrt2, arm 2 -> (c - d)/sqrt2.
    w_c, w_d = phi / np.sqrt(2.0), phi / np.sqrt(2.0)
    z_c, z_d = chi / np.sqrt(2.0), -chi / np.sqrt(2.0)

    # Two-photon amplitude for one photon in (c, mu) and one in (d, nu).
    amp_cd = w_c[:, None] * z_d[None, :] + z_c[:, None] * w_d[None, :]
    p_coinc = float(np.sum(np.abs(amp_cd) ** 2))

    # Bunched terms, for the completeness check only.
    def same_port(w, z):
        off = w[:, None] * z[None, :] + w[None, :] * z[:, None]
        diag = np.sqrt(2.0) * w * z
        total = 0.0
        iu = np.triu_indices(len(w), k=1)
        total += float(np.sum(np.abs(off[iu]) ** 2))
        total += float(np.sum(np.abs(diag) ** 2))
        return total

    total_prob = p_coinc + same_port(w_c, z_c) + same_port(w_d, z_d)
    if abs(total_prob - 1.0) > 1e-9:
        raise RuntimeError(
            f"two-photon Fock amplitudes are not normalized (sum {total_prob})"
        )

    return p_coinc / 0.5
