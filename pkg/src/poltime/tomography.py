"""Reconstruction of the logical two-qubit state from dip-scan projections.

The default projection set is the product of {h, v, p, r} polarizations with
{0, tau, +, x} bin states: 16 rank-1 projectors that span the full operator
space.  Every member is prepared as an ancilla and scanned; each projector's
dip depth estimates p_i = <psi_i| rho |psi_i>.  A scan whose ancilla occupies
a single bin also reads the bin-shifted projector at delay +-tau, so the
eight single-bin projectors are each measured twice and their counts pooled.

Reconstruction is by penalized-free maximum likelihood over the Cholesky
cone: rho = T^dag T / tr(T^dag T) with T lower triangular, maximizing a
Poisson likelihood in the raw counts.  Linear inversion is kept as the
unconstrained baseline and as a starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import experiment, hilbert, hom, optics
from .hilbert import DensityMatrix, PhotonState, TimeBinLattice, Wavepacket

POLARIZATION_SET = ("h", "v", "p", "r")
BIN_SET = ("0", "t", "+", "x")

_DIM = 4
_LOWER_PAIRS = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))
_Q_FLOOR = 1e-12


class ReconstructionError(RuntimeError):
    """Maximum-likelihood search failed to converge."""

    def __init__(self, message: str, best_nll: float = np.nan):
        super().__init__(message)
        self.best_nll = best_nll


@dataclass(frozen=True)
class TomographyMember:
    """One projector of the set and where its dip depth is read.

    `readings` lists every (scan index, lag) pair that measures this
    projector; the first entry is the member's own scan at zero delay.
    """

    label: str
    state: PhotonState
    plan: optics.PreparationPlan | None
    readings: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ScanEntry:
    """One physical scan: which ancilla to prepare, which members it feeds."""

    ancilla_label: str
    ancilla: PhotonState
    readings: tuple[tuple[int, int], ...]  # (member index, lag)


@dataclass(frozen=True)
class TomographySet:
    members: tuple[TomographyMember, ...]
    scans: tuple[ScanEntry, ...]
    lattice: TimeBinLattice
    packet: Wavepacket

    def states(self) -> list[PhotonState]:
        return [m.state for m in self.members]

    def labels(self) -> list[str]:
        return [m.label for m in self.members]


def default_tomography_set(
    lattice: TimeBinLattice,
    packet: Wavepacket,
    with_plans: bool = True,
) -> TomographySet:
    """The 16-state product set with its scan schedule.

    Member i doubles as the ancilla of scan i.  Single-bin scans carry a
    second reading: the bin-0 scan reads its tau partner at lag +1 and the
    tau scan reads the bin-0 partner at lag -1 (the shift must land on the
    logical lattice), so those projectors are sampled twice.
    """
    member_codes = [(pol, b) for pol in POLARIZATION_SET for b in BIN_SET]
    scan_readings: list[list[tuple[int, int]]] = []
    for i, (_, b) in enumerate(member_codes):
        if b == "0":
            scan_readings.append([(i, 0), (i + 1, 1)])
        elif b == "t":
            scan_readings.append([(i, 0), (i - 1, -1)])
        else:
            scan_readings.append([(i, 0)])

    member_reads: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(member_codes))}
    for j, reads in enumerate(scan_readings):
        for member_index, lag in reads:
            member_reads[member_index].append((j, lag))
    for i in member_reads:  # own scan first
        member_reads[i].sort(key=lambda sl: sl[1] != 0)

    members = []
    scans = []
    for i, (pol, b) in enumerate(member_codes):
        label = pol + b
        state = hilbert.product_state(pol, b, lattice, packet)
        plan = optics.compile_preparation(state) if with_plans else None
        members.append(TomographyMember(label, state, plan, tuple(member_reads[i])))
        scans.append(ScanEntry(label, state, tuple(scan_readings[i])))
    return TomographySet(tuple(members), tuple(scans), lattice, packet)


# ---------------------------------------------------------------------------
# Linear algebra helpers
# ---------------------------------------------------------------------------


def _hermitian_basis() -> np.ndarray:
    """Orthonormal Hermitian basis of the 4x4 operator space, (16, 4, 4)."""
    basis = []
    for a in range(_DIM):
        b = np.zeros((_DIM, _DIM), dtype=complex)
        b[a, a] = 1.0
        basis.append(b)
    for a in range(_DIM):
        for b_i in range(a + 1, _DIM):
            m = np.zeros((_DIM, _DIM), dtype=complex)
            m[a, b_i] = m[b_i, a] = 1.0 / np.sqrt(2.0)
            basis.append(m)
            m = np.zeros((_DIM, _DIM), dtype=complex)
            m[a, b_i] = 1j / np.sqrt(2.0)
            m[b_i, a] = -1j / np.sqrt(2.0)
            basis.append(m)
    return np.array(basis)


_HERM_BASIS = _hermitian_basis()


def projector_stack(tset: TomographySet) -> np.ndarray:
    """Rank-1 projectors of all members on the logical subspace, (16, 4, 4)."""
    vecs = [hilbert.logical_vector(m.state) for m in tset.members]
    return np.array([np.outer(v, v.conj()) for v in vecs])


def design_matrix(tset: TomographySet) -> np.ndarray:
    """Real matrix mapping Hermitian-basis coordinates to projector
    expectations.  Its smallest singular value measures informational
    completeness of the set."""
    projs = projector_stack(tset)
    return np.real(np.einsum("iab,mba->im", projs, _HERM_BASIS))


def linear_inversion(p_values, tset: TomographySet) -> tuple[np.ndarray, bool]:
    """Solve the 16 projector expectations for the unique Hermitian matrix.

    Returns (rho, has_negative_eigenvalue).  Noise can push eigenvalues
    negative; nothing is clipped here.
    """
    p = np.asarray(p_values, dtype=float)
    if p.shape != (len(tset.members),):
        raise ValueError(f"expected {len(tset.members)} projection values")
    a = design_matrix(tset)
    try:
        x = np.linalg.solve(a, p)
    except np.linalg.LinAlgError as exc:
        raise ValueError("tomography set does not span the operator space") from exc
    rho = np.einsum("m,mab->ab", x, _HERM_BASIS)
    rho = 0.5 * (rho + rho.conj().T)
    negative = bool(np.linalg.eigvalsh(rho).min() < -hilbert.EIGENVALUE_TOL)
    return rho, negative


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(mat)
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def _coerce_matrix(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.matrix
    mat = np.asarray(state, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square density matrix")
    return mat


def fidelity(rho, target) -> float:
    """State fidelity of a reconstruction against a pure or mixed target.

    Pure target: <psi|rho|psi>.  Mixed target: (tr sqrt(sqrt(rho) sigma
    sqrt(rho)))^2, symmetric in its arguments.
    """
    rho_m = _coerce_matrix(rho)
    if isinstance(target, PhotonState):
        vec = hilbert.logical_vector(target)
    else:
        arr = np.asarray(target, dtype=complex)
        vec = arr if arr.ndim == 1 else None
    if vec is not None:
        n2 = float(np.vdot(vec, vec).real)
        return float(np.real(np.vdot(vec, rho_m @ vec)) / n2)
    sigma = _coerce_matrix(target)
    sr = _psd_sqrt(rho_m)
    evals = np.linalg.eigvalsh(sr @ sigma @ sr)
    return float(np.sum(np.sqrt(np.clip(evals, 0.0, None))) ** 2)


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Trace-one PSD matrix drawn from the Ginibre ensemble."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# Maximum likelihood
# ---------------------------------------------------------------------------


def _t_matrix(params: np.ndarray) -> np.ndarray:
    t = np.zeros((_DIM, _DIM), dtype=complex)
    t[np.arange(_DIM), np.arange(_DIM)] = params[:_DIM]
    for k, (i, j) in enumerate(_LOWER_PAIRS):
        t[i, j] = params[_DIM + 2 * k] + 1j * params[_DIM + 2 * k + 1]
    return t


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    """Lower-triangular parametrization with T^dag T = rho (UL Cholesky)."""
    flip = np.eye(_DIM)[::-1]
    chol = np.linalg.cholesky(flip @ rho @ flip)
    t = (flip @ chol @ flip).conj().T  # lower triangular
    params = np.empty(16)
    params[:_DIM] = t.diagonal().real
    for k, (i, j) in enumerate(_LOWER_PAIRS):
        params[_DIM + 2 * k] = t[i, j].real
        params[_DIM + 2 * k + 1] = t[i, j].imag
    return params


def _rho_from_params(params: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    t = _t_matrix(params)
    s = t.conj().T @ t
    tr = float(np.trace(s).real)
    if tr <= 0.0:
        return np.eye(_DIM, dtype=complex) / _DIM, t, 0.0
    return s / tr, t, tr


def _nll_and_grad(
    params: np.ndarray,
    projs_t: np.ndarray,
    n_counts: np.ndarray,
    baselines: np.ndarray,
    vis: float,
):
    rho, t, tr = _rho_from_params(params)
    if tr <= 0.0:
        return 1e300, np.zeros_like(params)
    expect = np.real(np.einsum("iab,ab->i", projs_t, rho))
    q = np.clip(1.0 - vis * expect, _Q_FLOOR, None)
    rates = baselines * q
    nll = float(np.sum(rates - n_counts * np.log(rates)))

    w = baselines - n_counts / q  # d nll / d q_i
    g_rho = -vis * np.einsum("i,iab->ab", w, projs_t)  # Hermitian
    # Chain through rho = S / tr(S), S = T^dag T.
    g_s = g_rho / tr - (np.real(np.sum(g_rho * (t.conj().T @ t))) / tr**2) * np.eye(
        _DIM
    )
    m = g_s.conj() @ t.conj().T
    grad = np.empty_like(params)
    grad[:_DIM] = 2.0 * np.real(m.diagonal())
    for k, (i, j) in enumerate(_LOWER_PAIRS):
        grad[_DIM + 2 * k] = 2.0 * np.real(m[j, i])
        grad[_DIM + 2 * k + 1] = -2.0 * np.imag(m[j, i])
    return nll, grad


def _unpack_counts(counts) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(counts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("counts must be a sequence of (n_i, N_i) pairs")
    n, baseline = arr[:, 0], arr[:, 1]
    if np.any(n < 0) or np.any(baseline <= 0):
        raise ValueError("counts must be nonnegative and baselines positive")
    return n, baseline


@dataclass(frozen=True)
class TomographyResult:
    rho_hat: DensityMatrix
    nll: float
    iterations: int
    fidelity_vs_target: float | None = None
    fidelity_std: float | None = None
    bootstrap_replicas: int = 0


def mle_reconstruct(
    counts,
    tset: TomographySet,
    visibility: float = 1.0,
    target=None,
    seed: int = 0,
    restarts: int = 3,
    objective_tol: float = 1e-10,
) -> TomographyResult:
    """Maximum-likelihood density matrix from per-projection (n_i, N_i) counts.

    The Poisson log likelihood of the dip counts is minimized over the
    Cholesky cone from several starts: the maximally mixed state, the
    (projected) linear-inversion solution, and seeded random points.  The
    result is deterministic for fixed inputs and seed.
    """
    if restarts < 3:
        raise ValueError("mle_reconstruct needs at least 3 restarts")
    n, baseline = _unpack_counts(counts)
    if n.shape != (len(tset.members),):
        raise ValueError(f"expected counts for {len(tset.members)} projections")
    if not 0.0 < visibility <= 1.0:
        raise ValueError("visibility must lie in (0, 1]")

    projs = projector_stack(tset)
    projs_t = projs.transpose(0, 2, 1)  # trace(P rho) = sum(P^T * rho)

    starts = [_params_from_rho(np.eye(_DIM, dtype=complex) / _DIM)]
    p_hat = np.clip((1.0 - n / baseline) / visibility, 0.0, 1.0)
    rho_li, _ = linear_inversion(p_hat, tset)
    evals, evecs = np.linalg.eigh(rho_li)
    # Floor keeps the Cholesky well defined without displacing the start
    # measurably; zero eigenvalues stay effectively on the boundary.
    evals = np.clip(evals, 1e-10, None)
    rho_li_psd = (evecs * evals) @ evecs.conj().T
    rho_li_psd /= np.trace(rho_li_psd).real
    starts.append(_params_from_rho(rho_li_psd))
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    for _ in range(restarts - 2):
        starts.append(rng.normal(scale=0.5, size=16))

    opts = {
        "ftol": min(objective_tol, 1e-12) * 1e-3,
        "gtol": 1e-11,
        "maxiter": 2000,
    }
    best = None
    total_nit = 0
    for x0 in starts:
        res = optimize.minimize(
            _nll_and_grad,
            x0,
            args=(projs_t, n, baseline, visibility),
            jac=True,
            method="L-BFGS-B",
            options=opts,
        )
        total_nit += int(res.nit)
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise ReconstructionError(
            "likelihood search failed from every start", best_nll=np.nan
        )
    # A restart from the winner resets the Hessian memory and typically
    # buys back the last orders of magnitude near the PSD boundary.
    polish = optimize.minimize(
        _nll_and_grad,
        best.x,
        args=(projs_t, n, baseline, visibility),
        jac=True,
        method="L-BFGS-B",
        options=opts,
    )
    total_nit += int(polish.nit)
    if polish.success and polish.fun <= best.fun:
        best = polish

    rho, _, _ = _rho_from_params(best.x)
    rho_dm = DensityMatrix(rho_to_full(rho, tset), tset.lattice, tset.packet)
    fid = None if target is None else fidelity(rho, target)
    return TomographyResult(
        rho_hat=rho_dm,
        nll=float(best.fun),
        iterations=total_nit,
        fidelity_vs_target=fid,
    )


def rho_to_full(rho_logical: np.ndarray, tset: TomographySet) -> np.ndarray:
    """Embed a 4x4 logical matrix into the full lattice index space."""
    n = tset.lattice.bin_count
    full = np.zeros((2 * n, 2 * n), dtype=complex)
    idx = np.array([0, 1, n, n + 1])
    full[np.ix_(idx, idx)] = rho_logical
    return full


def logical_rho(result: TomographyResult) -> np.ndarray:
    """4x4 logical block of a reconstruction."""
    n = result.rho_hat.bin_count
    idx = np.array([0, 1, n, n + 1])
    return result.rho_hat.matrix[np.ix_(idx, idx)]


@dataclass(frozen=True)
class BootstrapResult:
    fidelity_std: float
    rho_real_std: np.ndarray
    rho_imag_std: np.ndarray
    replicas_used: int
    replicas_dropped: int
    fidelities: np.ndarray


def bootstrap_errors(
    counts,
    tset: TomographySet,
    visibility: float,
    target,
    replicas: int = 100,
    seed: int = 0,
    restarts: int = 3,
) -> BootstrapResult:
    """Parametric bootstrap of the reconstruction.

    Each replica redraws n_i* ~ Poisson(n_i) at the observed counts and
    reruns the full likelihood search.  Failed replicas are dropped; more
    than 10 percent of them failing is an error.
    """
    if replicas < 2:
        raise ValueError("bootstrap needs at least 2 replicas")
    n, baseline = _unpack_counts(counts)
    fids = []
    rhos = []
    dropped = 0
    for r in range(replicas):
        rng = experiment.point_rng(seed, r)
        n_star = rng.poisson(n).astype(float)
        counts_star = np.stack([n_star, baseline], axis=1)
        try:
            res = mle_reconstruct(
                counts_star,
                tset,
                visibility=visibility,
                target=target,
                seed=experiment.derive_seed(seed, r),
                restarts=restarts,
            )
        except ReconstructionError:
            dropped += 1
            continue
        fids.append(res.fidelity_vs_target)
        rhos.append(logical_rho(res))
    if dropped > 0.1 * replicas:
        raise ReconstructionError(
            f"{dropped} of {replicas} bootstrap replicas failed to converge"
        )
    fids_arr = np.array(fids)
    rho_arr = np.array(rhos)
    return BootstrapResult(
        fidelity_std=float(np.std(fids_arr, ddof=1)),
        rho_real_std=np.std(rho_arr.real, axis=0, ddof=1),
        rho_imag_std=np.std(rho_arr.imag, axis=0, ddof=1),
        replicas_used=len(fids),
        replicas_dropped=dropped,
        fidelities=fids_arr,
    )


# ---------------------------------------------------------------------------
# Forward simulation of a full tomography run
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountsBundle:
    """Raw material of one tomography run, in member order."""

    counts: np.ndarray  # (16, 2) pairs (n_i, N_i)
    p_hat: np.ndarray  # (16,) clamped dip depths
    visibility_hat: float
    traces: tuple[experiment.ScanTrace, ...]


def simulate_counts(
    encoded: PhotonState | DensityMatrix,
    tset: TomographySet,
    baseline_counts: float,
    visibility: float = 1.0,
    master_seed: int = 0,
    delays=None,
    noiseless: bool = False,
    calibrate: bool = True,
) -> CountsBundle:
    """Run the scan schedule against an encoded state and collect counts.

    The interference visibility is calibrated from a scan of the encoded
    state against itself (stream 0); scheduled scans use streams 1..len.
    Mixed encoded states skip calibration and trust the configured value.
    """
    if delays is None:
        delays = experiment.default_delay_grid(tset.lattice.tau)

    if calibrate and isinstance(encoded, PhotonState):
        cal_cfg = experiment.ScanConfig(
            delays=delays,
            baseline_counts=baseline_counts,
            seed=experiment.derive_seed(master_seed, 0),
            visibility=visibility,
        )
        cal_trace = experiment.sample_scan(encoded, encoded, cal_cfg, noiseless)
        v_hat = experiment.estimate_visibility(cal_trace)
    else:
        v_hat = visibility

    n_members = len(tset.members)
    counts = np.zeros((n_members, 2))
    traces = []
    for j, entry in enumerate(tset.scans):
        cfg = experiment.ScanConfig(
            delays=delays,
            baseline_counts=baseline_counts,
            seed=experiment.derive_seed(master_seed, j + 1),
            visibility=visibility,
        )
        trace = experiment.sample_scan(encoded, entry.ancilla, cfg, noiseless)
        traces.append(trace)
        n0 = experiment.estimate_baseline(trace)
        readings = experiment.extract_projections(
            trace, experiment.occupied_bins(entry.ancilla)
        )
        by_lag = {r.lag: r for r in readings}
        for member_index, lag in entry.readings:
            reading = by_lag[lag]
            i = int(np.argmin(np.abs(trace.delays - reading.delay)))
            # Pooled Poisson streams stay Poisson: sum dips, sum baselines.
            counts[member_index] += (trace.counts[i], n0)
    p_hat = np.clip(1.0 - counts[:, 0] / counts[:, 1], 0.0, 1.0)
    return CountsBundle(
        counts=counts, p_hat=p_hat, visibility_hat=v_hat, traces=tuple(traces)
    )
