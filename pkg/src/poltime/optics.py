"""Optical elements acting on polarization/time-bin photon states.

Wave plates follow the Jones convention J = R(theta) D R(-theta) with
R the active rotation by theta and D the retarder diagonal: diag(1, -1)
for a half-wave plate, diag(1, i) for a quarter-wave plate, diag(1, 0)
for a polarizer.  A birefringent crystal delays the V component by an
integer number of lattice spacings (slow axis along V); the lattice grows
when amplitude is pushed past the last bin.

compile_preparation searches the element template

    QWP - HWP - CRYSTAL - [POL] - HWP - QWP

for settings that turn |h,0> into a requested two-qubit target, using
closed-form plate angles for the encodable state classes and a seeded
numerical search otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants
from scipy import optimize

from . import hilbert
from .hilbert import (
    PhotonState,
    StateAnnihilatedError,
    TimeBinLattice,
    Wavepacket,
)

SPEED_OF_LIGHT = constants.c
DEFAULT_CRYSTAL_LENGTH = 4e-3  # meters

CRYSTAL_DELAY_RTOL = 1e-6
EXACT_PLAN_TOL = 1e-9
_PRUNE_TOL = 1e-12
_CLASS_TOL = 1e-9
# Survival this far below the input norm is rounding residue of the Jones
# product (entries like cos(pi/2) ~ 1e-16), not a physical transmission.
ANNIHILATION_RTOL = 1e-24


def _wrap_angle(theta: float) -> float:
    """Normalize a plate angle into [0, pi); all plate actions are pi-periodic."""
    t = float(theta) % np.pi
    if t >= np.pi:  # guard against rounding at the boundary
        t -= np.pi
    return t


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class HalfWavePlate:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(self.theta))

    def jones(self) -> np.ndarray:
        c2, s2 = np.cos(2 * self.theta), np.sin(2 * self.theta)
        return np.array([[c2, s2], [s2, -c2]], dtype=complex)


@dataclass(frozen=True)
class QuarterWavePlate:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(self.theta))

    def jones(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array(
            [
                [c * c + 1j * s * s, c * s * (1 - 1j)],
                [c * s * (1 - 1j), s * s + 1j * c * c],
            ]
        )


@dataclass(frozen=True)
class Polarizer:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(self.theta))

    def jones(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[c * c, c * s], [c * s, s * s]], dtype=complex)


@dataclass(frozen=True)
class BirefringentCrystal:
    """Walk-off crystal: V is delayed by length * delta_n / c relative to H."""

    length: float
    delta_n: float

    def __post_init__(self):
        if self.length <= 0 or self.delta_n <= 0:
            raise ValueError("crystal length and index contrast must be positive")

    @property
    def delay(self) -> float:
        return self.length * self.delta_n / SPEED_OF_LIGHT

    def bin_shift(self, lattice: TimeBinLattice) -> int:
        ratio = self.delay / lattice.tau
        shift = int(round(ratio))
        if shift < 1 or abs(ratio - shift) > CRYSTAL_DELAY_RTOL * max(1.0, ratio):
            raise ValueError(
                f"crystal delay {self.delay:.6e} s is not a positive integer "
                f"multiple of the lattice spacing {lattice.tau:.6e} s"
            )
        return shift


def crystal_with_delay(
    delay: float, length: float = DEFAULT_CRYSTAL_LENGTH
) -> BirefringentCrystal:
    """Crystal of the given physical length tuned to the requested delay."""
    if delay <= 0:
        raise ValueError("delay must be positive")
    return BirefringentCrystal(length, delay * SPEED_OF_LIGHT / length)


OpticalElement = HalfWavePlate | QuarterWavePlate | Polarizer | BirefringentCrystal

_KIND_BY_TYPE = {
    HalfWavePlate: "HWP",
    QuarterWavePlate: "QWP",
    Polarizer: "POL",
    BirefringentCrystal: "CRYSTAL",
}


def element_action(element: OpticalElement, state: PhotonState) -> PhotonState:
    """Apply one element.  Polarizers may annihilate the photon; crystals
    may grow the lattice."""
    if isinstance(element, BirefringentCrystal):
        shift = element.bin_shift(state.lattice)
        mat = state.as_matrix()
        v_occupied = np.nonzero(np.abs(mat[1]) > 0.0)[0]
        grow = 0
        if v_occupied.size:
            grow = max(0, int(v_occupied.max()) + shift + 1 - state.bin_count)
        lattice = state.lattice.grown(grow) if grow else state.lattice
        n = lattice.bin_count
        out = np.zeros((2, n), dtype=complex)
        out[0, : state.bin_count] = mat[0]
        # Entries past copy_len are exactly zero by the growth rule above.
        copy_len = min(state.bin_count, n - shift)
        out[1, shift : shift + copy_len] = mat[1, :copy_len]
        return PhotonState(out.reshape(-1), lattice, state.packet)

    jones = element.jones()
    out = jones @ state.as_matrix()
    if (
        isinstance(element, Polarizer)
        and float(np.vdot(out, out).real) <= ANNIHILATION_RTOL * state.norm_squared
    ):
        raise StateAnnihilatedError("state annihilated")
    return PhotonState(out.reshape(-1), state.lattice, state.packet)


@dataclass(frozen=True)
class OpticalPipeline:
    """Ordered sequence of elements, applied left to right."""

    elements: tuple[OpticalElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def validate_for(self, lattice: TimeBinLattice) -> None:
        for el in self.elements:
            if isinstance(el, BirefringentCrystal):
                el.bin_shift(lattice)

    def to_json_dict(self) -> dict:
        out = []
        for el in self.elements:
            kind = _KIND_BY_TYPE[type(el)]
            if kind == "CRYSTAL":
                out.append({"kind": kind, "L_m": el.length, "dn": el.delta_n})
            else:
                out.append({"kind": kind, "theta_rad": el.theta})
        return {"elements": out}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "OpticalPipeline":
        elements: list[OpticalElement] = []
        try:
            records = data["elements"]
        except (KeyError, TypeError) as exc:
            raise ValueError("pipeline record must contain an 'elements' list") from exc
        for rec in records:
            kind = rec.get("kind")
            if kind == "HWP":
                elements.append(HalfWavePlate(float(rec["theta_rad"])))
            elif kind == "QWP":
                elements.append(QuarterWavePlate(float(rec["theta_rad"])))
            elif kind == "POL":
                elements.append(Polarizer(float(rec["theta_rad"])))
            elif kind == "CRYSTAL":
                elements.append(BirefringentCrystal(float(rec["L_m"]), float(rec["dn"])))
            else:
                raise ValueError(f"unknown element kind {kind!r}")
        return cls(tuple(elements))

    @classmethod
    def from_json(cls, text: str) -> "OpticalPipeline":
        return cls.from_json_dict(json.loads(text))


def apply_pipeline(pipeline: OpticalPipeline, state: PhotonState) -> PhotonState:
    for el in pipeline.elements:
        state = element_action(el, state)
    return state


# ---------------------------------------------------------------------------
# Two-bin entangling gate
# ---------------------------------------------------------------------------


def gate_matrix() -> np.ndarray:
    """Crystal action restricted to the two-bin logical subspace (h0, ht, v0, vt).

    |v,0> maps to |v,tau>; |v,tau> leaves the subspace entirely, so the map
    is non-unitary: U+U = diag(1, 1, 1, 0).
    """
    return np.array(
        [
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 0, 0],
            [0, 0, 1, 0],
        ],
        dtype=complex,
    )


def apply_gate(state: PhotonState) -> PhotonState:
    """Apply the logical gate on the first two bins.  Raises if the photon is
    pushed out of the logical subspace (the |v,tau> column)."""
    vec = hilbert.logical_vector(state)
    out = gate_matrix() @ vec
    if float(np.vdot(out, out).real) <= ANNIHILATION_RTOL * state.norm_squared:
        raise StateAnnihilatedError("state annihilated")
    return hilbert.from_logical(out, state.lattice, state.packet)


# ---------------------------------------------------------------------------
# Preparation compiler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrepTemplate:
    """Which slots of the preparation bench are available."""

    pre_plates: bool = True
    crystal: bool = True
    polarizer: bool = True
    post_plates: bool = True
    crystal_length: float = DEFAULT_CRYSTAL_LENGTH


DEFAULT_TEMPLATE = PrepTemplate()


@dataclass(frozen=True)
class PreparationPlan:
    """Element settings that turn the fixed source state into a target."""

    pipeline: OpticalPipeline
    input_state: PhotonState
    predicted_fidelity: float
    success_probability: float
    exactly_encodable: bool
    target_class: str

    def to_json_dict(self) -> dict:
        d = self.pipeline.to_json_dict()
        d.update(
            {
                "input_state": self.input_state.to_json_dict(),
                "predicted_fidelity": self.predicted_fidelity,
                "success_probability": self.success_probability,
                "exactly_encodable": self.exactly_encodable,
                "target_class": self.target_class,
            }
        )
        return d


def _stokes(v: np.ndarray) -> tuple[float, float, float]:
    x, y = v
    return (
        float(abs(x) ** 2 - abs(y) ** 2),
        float(2.0 * np.real(np.conj(x) * y)),
        float(2.0 * np.imag(np.conj(x) * y)),
    )


def _plates_to_state_pre(xi: np.ndarray) -> list[OpticalElement]:
    """QWP then HWP settings mapping |h> onto xi (up to global phase)."""
    s1, s2, s3 = _stokes(xi)
    q = 0.5 * np.arcsin(np.clip(s3, -1.0, 1.0))
    lam = np.arctan2(s2, s1)
    h = 0.25 * (lam + 2.0 * q)
    return [QuarterWavePlate(q), HalfWavePlate(h)]


def _plates_from_linear_post(chi: np.ndarray, psi: float = 0.0) -> list[OpticalElement]:
    """HWP then QWP settings mapping linear polarization at angle psi onto chi."""
    s1, s2, s3 = _stokes(chi)
    phi = 0.5 * np.arcsin(np.clip(s3, -1.0, 1.0))
    q = 0.5 * np.arctan2(s2, s1)
    th = 0.5 * (phi + q + psi)
    return [HalfWavePlate(th), QuarterWavePlate(q)]


def _prune_identity_elements(
    elements: list[OpticalElement], source: PhotonState
) -> list[OpticalElement]:
    """Drop elements whose action on the running state is a global phase."""
    kept: list[OpticalElement] = []
    state = source
    for el in elements:
        nxt = element_action(el, state)
        if nxt.lattice == state.lattice:
            ip = abs(np.vdot(state.amplitudes, nxt.amplitudes))
            n_a = np.linalg.norm(state.amplitudes)
            n_b = np.linalg.norm(nxt.amplitudes)
            if abs(n_a - n_b) < _PRUNE_TOL and ip >= n_a * n_b - _PRUNE_TOL:
                continue
        kept.append(el)
        state = nxt
    return kept


def _angle_budget(elements) -> float:
    total = 0.0
    for el in elements:
        if isinstance(el, BirefringentCrystal):
            continue
        total += min(el.theta, np.pi - el.theta)
    return total


@dataclass
class _Candidate:
    elements: list
    target_class: str
    fidelity: float = 0.0
    success: float = 0.0


def _evaluate(cand: _Candidate, source: PhotonState, target_vec: np.ndarray) -> None:
    try:
        out = apply_pipeline(OpticalPipeline(tuple(cand.elements)), source)
    except StateAnnihilatedError:
        cand.fidelity = 0.0
        cand.success = 0.0
        return
    cand.success = out.norm_squared
    amps = out.amplitudes / np.sqrt(cand.success)
    padded = np.zeros_like(amps).reshape(2, -1)
    tgt = target_vec.reshape(2, -1)
    padded[:, : tgt.shape[1]] = tgt
    cand.fidelity = float(abs(np.vdot(padded.reshape(-1), amps)) ** 2)


def _orthogonal_class_elements(
    c0: np.ndarray, c1: np.ndarray, crystal: BirefringentCrystal
) -> list[OpticalElement]:
    n0, n1 = np.linalg.norm(c0), np.linalg.norm(c1)
    chi0, chi1 = c0 / n0, c1 / n1
    post = _plates_from_linear_post(chi0, 0.0)
    v_mat = post[1].jones() @ post[0].jones()
    mu = np.angle(np.vdot(chi0, v_mat[:, 0]))
    nu = np.angle(np.vdot(chi1, v_mat[:, 1]))
    xi = np.array([n0 * np.exp(-1j * mu), n1 * np.exp(-1j * nu)])
    return _plates_to_state_pre(xi) + [crystal] + post


def _equal_pol_class_elements(
    c0: np.ndarray, c1: np.ndarray, crystal: BirefringentCrystal
) -> list[OpticalElement]:
    n0 = np.linalg.norm(c0)
    chi = c0 / n0
    a = n0
    b = complex(np.vdot(chi, c1))
    # Polarizer angle maximizing the heralding probability 1 / (|a| + |b|)^2.
    theta_p = np.arctan(np.sqrt(abs(b) / abs(a)))
    s = 1.0 / (abs(a) + abs(b)) ** 2
    xi = np.array([np.sqrt(s) * a / np.cos(theta_p), np.sqrt(s) * b / np.sin(theta_p)])
    post = _plates_from_linear_post(chi, theta_p)
    return _plates_to_state_pre(xi) + [crystal, Polarizer(theta_p)] + post


def _numeric_candidates(
    source: PhotonState,
    target_vec: np.ndarray,
    template: PrepTemplate,
    crystal: BirefringentCrystal,
    seed: int,
    restarts: int,
) -> list[_Candidate]:
    """Best-effort search over plate angles for targets outside the closed-form
    classes.  Deterministic for a given seed."""

    layouts = []
    if template.pre_plates and template.post_plates and template.crystal:
        layouts.append(("general", False))
        if template.polarizer:
            layouts.append(("general", True))
    if template.pre_plates or template.post_plates:
        layouts.append(("plates_only", False))

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    out: list[_Candidate] = []
    for layout, with_pol in layouts:
        if layout == "general":
            n_angles = 5 if with_pol else 4

            def build(angles, with_pol=with_pol):
                els: list[OpticalElement] = [
                    QuarterWavePlate(angles[0]),
                    HalfWavePlate(angles[1]),
                    crystal,
                ]
                k = 2
                if with_pol:
                    els.append(Polarizer(angles[k]))
                    k += 1
                els.append(HalfWavePlate(angles[k]))
                els.append(QuarterWavePlate(angles[k + 1]))
                return els

        else:
            n_angles = 2

            def build(angles, with_pol=False):
                return [QuarterWavePlate(angles[0]), HalfWavePlate(angles[1])]

        def objective(angles):
            cand = _Candidate(build(angles), "general")
            _evaluate(cand, source, target_vec)
            return -cand.fidelity

        best_x, best_f = None, np.inf
        starts = [np.zeros(n_angles)] + [
            rng.uniform(0.0, np.pi, size=n_angles) for _ in range(restarts)
        ]
        for x0 in starts:
            res = optimize.minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"fatol": 1e-12, "xatol": 1e-10, "maxiter": 4000},
            )
            if res.fun < best_f:
                best_x, best_f = res.x, res.fun
        out.append(_Candidate(build(best_x), "general"))
    return out


def compile_preparation(
    target: PhotonState,
    template: PrepTemplate | None = None,
    seed: int = 0,
    restarts: int = 5,
) -> PreparationPlan:
    """Find element settings preparing the target from the |h,0> source.

    Closed-form settings cover single-bin states, orthogonal-polarization
    two-bin superpositions, and equal-polarization two-bin superpositions
    (via the heralding polarizer).  Anything else falls back to a seeded
    numerical search and is flagged as not exactly encodable.

    Among plans of equal fidelity the one with fewer elements wins, then the
    one with the smaller total plate angle.
    """
    if template is None:
        template = DEFAULT_TEMPLATE
    if restarts < 5:
        raise ValueError("numerical fallback needs at least 5 restarts")
    if abs(target.norm_squared - 1.0) > hilbert.NORM_TOL:
        raise ValueError("compile_preparation expects a unit-norm target")

    logical = hilbert.logical_vector(target)  # raises on support outside bins 0, 1
    lattice, packet = target.lattice, target.packet
    source = hilbert.basis_state("h", 0, lattice, packet)
    crystal = crystal_with_delay(lattice.tau, template.crystal_length)
    target_vec = np.zeros(2 * lattice.bin_count, dtype=complex)
    target_vec.reshape(2, -1)[:, :2] = logical.reshape(2, 2)

    c0 = logical.reshape(2, 2)[:, 0]
    c1 = logical.reshape(2, 2)[:, 1]
    n0, n1 = np.linalg.norm(c0), np.linalg.norm(c1)

    candidates: list[_Candidate] = []

    if n1 <= _CLASS_TOL and template.pre_plates:
        candidates.append(
            _Candidate(_plates_to_state_pre(c0 / n0), "single_bin")
        )
    if n0 <= _CLASS_TOL and template.crystal:
        els: list[OpticalElement] = []
        if template.pre_plates:
            els += _plates_to_state_pre(np.array([0.0, 1.0], dtype=complex))
        els.append(crystal)
        if template.post_plates:
            els += _plates_from_linear_post(c1 / n1, np.pi / 2)
        candidates.append(_Candidate(els, "single_bin"))

    if n0 > _CLASS_TOL and n1 > _CLASS_TOL and template.crystal:
        chi0, chi1 = c0 / n0, c1 / n1
        cross = abs(np.vdot(chi0, chi1))
        if abs(c0[1]) <= _CLASS_TOL and abs(c1[0]) <= _CLASS_TOL and template.pre_plates:
            # Already of the form a|h,0> + b|v,tau>: pre plates plus crystal.
            xi = np.array([c0[0], c1[1]])
            candidates.append(
                _Candidate(_plates_to_state_pre(xi) + [crystal], "orthogonal")
            )
        if cross <= _CLASS_TOL and template.pre_plates and template.post_plates:
            candidates.append(
                _Candidate(_orthogonal_class_elements(c0, c1, crystal), "orthogonal")
            )
        if (
            cross >= 1.0 - _CLASS_TOL
            and template.polarizer
            and template.pre_plates
            and template.post_plates
        ):
            candidates.append(
                _Candidate(
                    _equal_pol_class_elements(c0, c1, crystal), "equal_polarization"
                )
            )

    for cand in candidates:
        cand.elements = _prune_identity_elements(cand.elements, source)
        _evaluate(cand, source, target_vec)

    best = max((c.fidelity for c in candidates), default=0.0)
    if best < 1.0 - EXACT_PLAN_TOL:
        numeric = _numeric_candidates(
            source, target_vec, template, crystal, seed, restarts
        )
        for cand in numeric:
            cand.elements = _prune_identity_elements(cand.elements, source)
            _evaluate(cand, source, target_vec)
        candidates += numeric

    if not candidates:
        raise ValueError("template leaves no usable preparation slots")

    best = max(c.fidelity for c in candidates)
    contenders = [c for c in candidates if c.fidelity >= best - EXACT_PLAN_TOL]
    chosen = min(
        contenders, key=lambda c: (len(c.elements), _angle_budget(c.elements))
    )

    return PreparationPlan(
        pipeline=OpticalPipeline(tuple(chosen.elements)),
        input_state=source,
        predicted_fidelity=chosen.fidelity,
        success_probability=chosen.success,
        exactly_encodable=chosen.fidelity >= 1.0 - EXACT_PLAN_TOL,
        target_class=chosen.target_class,
    )
