"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Subcommands: `prepare` (compile a plate/crystal pipeline for a target
state), `scan` (one synthetic delay scan with summary), `tomography`
(full 16-projection reconstruction with bootstrap errors), `oracle-check`
(self-test of the interference model against the Fock-space oracle).

Everything is deterministic for a fixed config and seed; pass
`--no-timestamp` when byte-identical reruns matter.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiment, hilbert, hom, optics, tomography
from .hilbert import PhotonState, StateAnnihilatedError, TimeBinLattice, Wavepacket
from .tomography import ReconstructionError

DEFAULT_TAU_S = 2.3e-12
DEFAULT_BINS = 2
DEFAULT_BANDWIDTH_NM = 3.0
DEFAULT_WAVELENGTH_NM = 780.0
DEFAULT_VISIBILITY = 1.0
DEFAULT_BASELINE_COUNTS = 1000.0
DEFAULT_HALF_SPAN_S = 8e-12
DEFAULT_STEP_S = 5e-14
DEFAULT_REPLICAS = 100

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BEST_EFFORT = 2
EXIT_NUMERICAL = 3

_FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


class ConfigError(ValueError):
    """Invalid configuration; collects every problem found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def bandwidth_to_sigma(bandwidth_nm: float, wavelength_nm: float) -> float:
    """Amplitude-envelope width of a transform-limited Gaussian filter.

    The filter bandwidth (intensity FWHM in wavelength) converts to a
    frequency FWHM, then through the Gaussian time-bandwidth product
    dnu * dt_fwhm = 2 ln2 / pi to an intensity FWHM in time, and finally
    to the sigma of the amplitude envelope.
    """
    if bandwidth_nm <= 0 or wavelength_nm <= 0:
        raise ValueError("bandwidth and wavelength must be positive")
    dnu = optics.SPEED_OF_LIGHT * (bandwidth_nm * 1e-9) / (wavelength_nm * 1e-9) ** 2
    dt_fwhm = (2.0 * np.log(2.0) / np.pi) / dnu
    return dt_fwhm / _FWHM_TO_SIGMA


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description; the echo of record for outputs."""

    lattice: TimeBinLattice
    packet: Wavepacket
    encoded_label: str
    encoded: PhotonState
    ancilla_label: str
    ancilla: PhotonState | None  # None only for ancilla "tomography"
    visibility: float
    baseline_counts: float
    half_span_s: float
    step_s: float
    seed: int
    replicas: int
    bandwidth_nm: float | None
    wavelength_nm: float | None

    def delays(self) -> np.ndarray:
        return experiment.default_delay_grid(
            self.lattice.tau, half_span=self.half_span_s, step=self.step_s
        )

    def echo(self) -> dict:
        return {
            "tau_s": self.lattice.tau,
            "bins": self.lattice.bin_count,
            "sigma_t_s": self.packet.sigma_t,
            "bandwidth_nm": self.bandwidth_nm,
            "wavelength_nm": self.wavelength_nm,
            "encoded_target": self.encoded_label,
            "encoded_amps": _amps_json(self.encoded),
            "ancilla": self.ancilla_label,
            "visibility": self.visibility,
            "baseline_counts": self.baseline_counts,
            "grid": {"half_span_s": self.half_span_s, "step_s": self.step_s},
            "seed": self.seed,
            "replicas": self.replicas,
        }


def _amps_json(state: PhotonState) -> list[list[float]]:
    vec = hilbert.logical_vector(state)
    return [[float(a.real), float(a.imag)] for a in vec]


def _resolve_state(value, lattice, packet, field, problems) -> tuple[str, PhotonState | None]:
    if isinstance(value, str):
        try:
            return value, hilbert.named_state(value, lattice, packet)
        except KeyError:
            problems.append(f"{field}: unknown state name {value!r}")
            return value, None
    try:
        pairs = [complex(float(re), float(im)) for re, im in value]
    except (TypeError, ValueError):
        problems.append(f"{field}: expected a state name or a list of [re, im] pairs")
        return "custom", None
    if len(pairs) != 4:
        problems.append(f"{field}: explicit amplitudes need 4 logical entries")
        return "custom", None
    vec = np.array(pairs)
    norm = np.linalg.norm(vec)
    if norm <= 0:
        problems.append(f"{field}: amplitudes are all zero")
        return "custom", None
    return "custom", hilbert.from_logical(vec / norm, lattice, packet)


def load_config(path: str | None, seed_override: int | None = None) -> ExperimentConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    return resolve_config(raw, seed_override)


def resolve_config(raw: dict, seed_override: int | None = None) -> ExperimentConfig:
    problems: list[str] = []

    def positive(key, default):
        val = raw.get(key, default)
        try:
            val = float(val)
        except (TypeError, ValueError):
            problems.append(f"{key}: must be a number")
            return default
        if val <= 0:
            problems.append(f"{key}: must be positive")
            return default
        return val

    tau = positive("tau_s", DEFAULT_TAU_S)
    bins = raw.get("bins", DEFAULT_BINS)
    if not isinstance(bins, int) or bins < 2:
        problems.append("bins: must be an integer >= 2")
        bins = DEFAULT_BINS

    has_sigma = "sigma_t_s" in raw
    has_band = "bandwidth_nm" in raw or "wavelength_nm" in raw
    bandwidth = wavelength = None
    if has_sigma and has_band:
        problems.append("give either sigma_t_s or bandwidth_nm+wavelength_nm, not both")
    if has_sigma:
        sigma_t = positive("sigma_t_s", None)
    else:
        bandwidth = positive("bandwidth_nm", DEFAULT_BANDWIDTH_NM)
        wavelength = positive("wavelength_nm", DEFAULT_WAVELENGTH_NM)
        sigma_t = bandwidth_to_sigma(bandwidth, wavelength)

    visibility = raw.get("visibility", DEFAULT_VISIBILITY)
    try:
        visibility = float(visibility)
        if not 0.0 <= visibility <= 1.0:
            problems.append("visibility: must lie in [0, 1]")
    except (TypeError, ValueError):
        problems.append("visibility: must be a number")
        visibility = DEFAULT_VISIBILITY

    baseline = positive("baseline_counts", DEFAULT_BASELINE_COUNTS)
    grid = raw.get("grid", {})
    if not isinstance(grid, dict):
        problems.append("grid: must be an object with half_span_s / step_s")
        grid = {}
    half_span = float(grid.get("half_span_s", DEFAULT_HALF_SPAN_S))
    step = float(grid.get("step_s", DEFAULT_STEP_S))
    if half_span <= 0 or step <= 0:
        problems.append("grid: half_span_s and step_s must be positive")

    seed = raw.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    if not isinstance(seed, int) or seed < 0:
        problems.append("seed: must be a nonnegative integer")
        seed = 0
    replicas = raw.get("replicas", DEFAULT_REPLICAS)
    if not isinstance(replicas, int) or replicas < 2:
        problems.append("replicas: must be an integer >= 2")
        replicas = DEFAULT_REPLICAS

    if problems:
        raise ConfigError(problems)

    lattice = TimeBinLattice(bin_count=bins, tau=tau)
    packet = Wavepacket(sigma_t=sigma_t)

    encoded_label, encoded = _resolve_state(
        raw.get("encoded_target", "phi_plus"), lattice, packet, "encoded_target", problems
    )
    ancilla_raw = raw.get("ancilla", raw.get("encoded_target", "phi_plus"))
    if ancilla_raw == "tomography":
        ancilla_label, ancilla = "tomography", None
    else:
        ancilla_label, ancilla = _resolve_state(
            ancilla_raw, lattice, packet, "ancilla", problems
        )
    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        lattice=lattice,
        packet=packet,
        encoded_label=encoded_label,
        encoded=encoded,
        ancilla_label=ancilla_label,
        ancilla=ancilla,
        visibility=visibility,
        baseline_counts=baseline,
        half_span_s=half_span,
        step_s=step,
        seed=seed,
        replicas=replicas,
        bandwidth_nm=bandwidth,
        wavelength_nm=wavelength,
    )


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    return obj


def _write_json(path: Path, payload: dict, timestamp: bool) -> None:
    if timestamp:
        payload = dict(payload)
        payload["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    path.write_text(json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n")


def _complex_matrix_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def _write_matrix_csv(path: Path, mat: np.ndarray) -> None:
    lines = [",".join(f"{x:.17g}" for x in row) for row in np.asarray(mat, dtype=float)]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_prepare(cfg: ExperimentConfig, out_dir: Path, timestamp: bool) -> int:
    plan = optics.compile_preparation(cfg.encoded, seed=cfg.seed)
    payload = plan.to_json_dict()
    payload["target"] = cfg.encoded_label
    payload["resolved_config"] = cfg.echo()
    _write_json(out_dir / "plan.json", payload, timestamp)
    if not plan.exactly_encodable:
        print(
            f"best-effort plan: fidelity {plan.predicted_fidelity:.6f}",
            file=sys.stderr,
        )
        return EXIT_BEST_EFFORT
    return EXIT_OK


def cmd_scan(cfg: ExperimentConfig, out_dir: Path, timestamp: bool, noiseless: bool) -> int:
    if cfg.ancilla is None:
        raise ConfigError('ancilla "tomography" belongs to the tomography subcommand')
    scan_cfg = experiment.ScanConfig(
        delays=cfg.delays(),
        baseline_counts=cfg.baseline_counts,
        seed=cfg.seed,
        visibility=cfg.visibility,
    )
    trace = experiment.sample_scan(cfg.encoded, cfg.ancilla, scan_cfg, noiseless=noiseless)
    experiment.write_trace_csv(trace, out_dir / "trace.csv")

    baseline = experiment.estimate_baseline(trace)
    r_zero = experiment.ratio_at_lag(trace, 0)
    dip_depths = {
        str(lag): float(np.clip(1.0 - experiment.ratio_at_lag(trace, lag), 0.0, 1.0))
        for lag in (-1, 0, 1)
    }
    summary = {
        "baseline": baseline,
        "r_hat_zero": r_zero,
        "visibility_hat": float(np.clip(1.0 - r_zero, 0.0, 1.0)),
        "dip_depths": dip_depths,
        "noiseless": noiseless,
        "resolved_config": cfg.echo(),
    }
    _write_json(out_dir / "summary.json", summary, timestamp)
    return EXIT_OK


def cmd_tomography(cfg: ExperimentConfig, out_dir: Path, timestamp: bool, noiseless: bool) -> int:
    tset = tomography.default_tomography_set(cfg.lattice, cfg.packet, with_plans=False)
    bundle = tomography.simulate_counts(
        cfg.encoded,
        tset,
        baseline_counts=cfg.baseline_counts,
        visibility=cfg.visibility,
        master_seed=cfg.seed,
        delays=cfg.delays(),
        noiseless=noiseless,
    )
    result = tomography.mle_reconstruct(
        bundle.counts,
        tset,
        visibility=bundle.visibility_hat,
        target=cfg.encoded,
        seed=cfg.seed,
    )
    boot = tomography.bootstrap_errors(
        bundle.counts,
        tset,
        bundle.visibility_hat,
        cfg.encoded,
        replicas=cfg.replicas,
        seed=cfg.seed,
    )
    rho = tomography.logical_rho(result)

    payload = {
        "rho": _complex_matrix_json(rho),
        "fidelity": result.fidelity_vs_target,
        "fidelity_std": boot.fidelity_std,
        "nll": result.nll,
        "iterations": result.iterations,
        "replicas": boot.replicas_used,
        "replicas_dropped": boot.replicas_dropped,
        "seed": cfg.seed,
        "visibility_hat": bundle.visibility_hat,
        "rho_real_std": np.round(boot.rho_real_std, 12),
        "rho_imag_std": np.round(boot.rho_imag_std, 12),
        "resolved_config": cfg.echo(),
    }
    _write_json(out_dir / "result.json", payload, timestamp)
    _write_matrix_csv(out_dir / "rho_real.csv", rho.real)
    _write_matrix_csv(out_dir / "rho_imag.csv", rho.imag)

    rows = ["label,p_hat,dip_counts,baseline_counts"]
    for member, (n_i, big_n), p in zip(tset.members, bundle.counts, bundle.p_hat):
        rows.append(f"{member.label},{p:.17g},{n_i:.17g},{big_n:.17g}")
    (out_dir / "projections.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


def cmd_oracle_check(cfg: ExperimentConfig, triples: int) -> int:
    """Compare the closed-form coincidence ratio with the Fock enumeration."""
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for k in range(triples):
        bins = int(rng.integers(2, 5))
        lattice = TimeBinLattice(bin_count=bins, tau=cfg.lattice.tau)
        sigma = cfg.packet.sigma_t if k % 2 == 0 else cfg.lattice.tau / 20.0
        packet = Wavepacket(sigma_t=sigma)
        def random_state():
            amps = rng.normal(size=2 * bins) + 1j * rng.normal(size=2 * bins)
            return PhotonState(amps / np.linalg.norm(amps), lattice, packet)

        enc, anc = random_state(), random_state()
        delay = float(rng.uniform(-2.0, 2.0) * lattice.tau)
        vis = float(rng.uniform(0.5, 1.0))
        fast = hom.coincidence_ratio(enc, anc, delay, vis).ratio
        slow = hom.fock_oracle_ratio(enc, anc, delay, vis)
        worst = max(worst, abs(fast - slow))
    print(f"oracle check: {triples} triples, max |deviation| = {worst:.3e}")
    if worst > 1e-9:
        print("oracle check FAILED (tolerance 1e-9)", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poltime",
        description="Polarization + time-bin photon encoding: simulate and reconstruct.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("prepare", "compile an optical preparation plan for the target state"),
        ("scan", "synthesize one HOM delay scan and summarize its dips"),
        ("tomography", "run the 16-projection reconstruction with bootstrap errors"),
        ("oracle-check", "self-test interference model against the Fock oracle"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", default=None, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument(
            "--noiseless",
            action="store_true",
            help="emit expected counts instead of Poisson samples",
        )
        p.add_argument(
            "--no-timestamp",
            action="store_true",
            help="omit generated_at for byte-identical reruns",
        )
        if name == "oracle-check":
            p.add_argument(
                "--triples", type=int, default=50, help="number of random comparisons"
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timestamp = not args.no_timestamp
    try:
        if args.command == "prepare":
            return cmd_prepare(cfg, out_dir, timestamp)
        if args.command == "scan":
            return cmd_scan(cfg, out_dir, timestamp, args.noiseless)
        if args.command == "tomography":
            return cmd_tomography(cfg, out_dir, timestamp, args.noiseless)
        if args.command == "oracle-check":
            return cmd_oracle_check(cfg, args.triples)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReconstructionError, StateAnnihilatedError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # Grid/geometry problems surface as ValueError from the model layer.
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
