"""Entanglement-assisted qubit amplifier: closed-form laws and Fock-space simulation.

The circuit is a polarization Mach-Zehnder (PBS_in, PBS_out) with a partially
polarizing splitter in each arm. Each PPBS mixes the signal with one photon of
a |Phi+> ancilla pair; a coincidence on D1 & D2 measured in the D/A basis
heralds success.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

import numpy as np

from .elements import pbs, phase_flip, ppbs1, ppbs2, rotate_to_DA
from .errors import ParamError, PolicyError, ZeroSuccessError
from .fock import (
    VACUUM,
    DensityMatrix,
    FockState,
    ModeLabel,
    Pol,
    StateVector,
    partial_trace,
    pol_pair,
    project,
)

ZERO_SUCCESS = 1e-30

OUT = "out"
D1, D2 = "D1", "D2"
A1, A2 = "a1", "a2"
_VAC_PORT, _DUMP = "amp.vac", "amp.dump"
_ARM1, _ARM2, _ARM1_OUT, _ARM2_OUT = "amp.s1", "amp.s2", "amp.o1", "amp.o2"

# after the D/A rotation the H slot of a detector block counts D photons, V counts A
D1_D, D1_A = pol_pair(D1)
D2_D, D2_A = pol_pair(D2)
OUT_H, OUT_V = pol_pair(OUT)


class Policy(str, Enum):
    DD_AA_ONLY = "DD_AA_only"
    FEED_FORWARD = "with_feed_forward"


@dataclass(frozen=True)
class QubitVacuumInput:
    """alpha|0> + beta_h|H> + beta_v|V> on a single spatial mode."""

    alpha: complex
    beta_h: complex
    beta_v: complex

    def __post_init__(self):
        for f in ("alpha", "beta_h", "beta_v"):
            object.__setattr__(self, f, complex(getattr(self, f)))
        norm = abs(self.alpha) ** 2 + abs(self.beta_h) ** 2 + abs(self.beta_v) ** 2
        if abs(norm - 1) > 1e-12:
            raise ParamError(f"input not normalized: |alpha|^2+|beta|^2 = {norm!r}")

    @classmethod
    def normalize(cls, alpha, beta_h, beta_v) -> "QubitVacuumInput":
        v = np.array([alpha, beta_h, beta_v], dtype=complex)
        n = np.linalg.norm(v)
        if n == 0:
            raise ParamError("zero amplitude vector")
        return cls(*(v / n))

    @classmethod
    def from_vacuum_weight(cls, vacuum_weight: float, theta: float = 0.0, phi: float = 0.0) -> "QubitVacuumInput":
        """Vacuum probability ``vacuum_weight``; qubit cos(theta)|H> + e^{i phi} sin(theta)|V>."""
        if not 0 <= vacuum_weight <= 1:
            raise ParamError(f"vacuum weight {vacuum_weight} outside [0, 1]")
        b = math.sqrt(1 - vacuum_weight)
        return cls.normalize(math.sqrt(vacuum_weight), b * math.cos(theta), b * math.sin(theta) * np.exp(1j * phi))

    @property
    def vacuum_weight(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def qubit_weight(self) -> float:
        return abs(self.beta_h) ** 2 + abs(self.beta_v) ** 2

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta_h, self.beta_v])

    def fidelity(self, other: "QubitVacuumInput") -> float:
        return float(abs(np.vdot(self.vector(), other.vector())) ** 2)

    def as_state(self, spatial: str = "in", n_max: int = 4) -> StateVector:
        h, v = pol_pair(spatial)
        return StateVector({VACUUM: self.alpha, FockState({h: 1}): self.beta_h, FockState({v: 1}): self.beta_v},
                           modes=[spatial], n_max=n_max)


@dataclass(frozen=True)
class AmplifierConfig:
    r: float
    policy: Policy = Policy.DD_AA_ONLY

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if not 0 <= self.r <= 1:
            raise ParamError(f"r={self.r} outside [0, 1]")
        if self.policy is Policy.FEED_FORWARD and self.r != 0:
            raise PolicyError("feed-forward heralding is only defined for r = 0")


@dataclass(frozen=True)
class AmplifierOutcome:
    output: QubitVacuumInput
    success_prob: float
    gain: float
    nominal_gain: float


def gain(r: float) -> float:
    """Qubit-to-vacuum probability ratio multiplier, (3r^2-1)^2 / (4r^2). r = 0 gives inf."""
    if not 0 <= r <= 1:
        raise ParamError(f"r={r} outside [0, 1]")
    r2 = r * r
    if r2 == 0:
        return math.inf
    return (3 * r2 - 1) ** 2 / (4 * r2)


def _qubit_factor(r: float) -> float:
    return (3 * r * r - 1) / 2


def success_probability(r: float, inp: QubitVacuumInput, policy: Policy = Policy.DD_AA_ONLY) -> float:
    policy = Policy(policy)
    if policy is Policy.FEED_FORWARD:
        AmplifierConfig(r, policy)
        return inp.qubit_weight / 2
    if not 0 <= r <= 1:
        raise ParamError(f"r={r} outside [0, 1]")
    # r^2 * G = ((3r^2-1)/2)^2 stays finite at r = 0
    return r * r * inp.vacuum_weight + _qubit_factor(r) ** 2 * inp.qubit_weight


def nominal_gain(r: float, inp: QubitVacuumInput) -> float:
    """Increase of the qubit-presence probability, G / (|alpha|^2 + G |beta|^2)."""
    g = gain(r)
    if math.isinf(g):
        return 1 / inp.qubit_weight if inp.qubit_weight > 0 else math.inf
    return g / (inp.vacuum_weight + g * inp.qubit_weight)


def low_branch_r2(G: float) -> float:
    """Smaller root r^2 of 9r^4 - (6+4G) r^2 + 1 = 0, written without cancellation."""
    if math.isinf(G):
        return 0.0
    s = math.sqrt(G * G + 3 * G)
    return (3 - 6 * G / (G + s)) / 9 if G > 0 else 1 / 3


def reflectivity_for_gain(G: float) -> tuple[float, float | None]:
    """Reflectivities realizing gain ``G``: (r_low, r_high); r_high is None when G > 1."""
    if math.isnan(G) or G < 0:
        raise ParamError(f"gain {G} must be >= 0")
    if math.isinf(G):
        return 0.0, None
    r_low = math.sqrt(low_branch_r2(G))
    if G > 1:
        return r_low, None
    r2_high = (3 + 2 * G + 2 * math.sqrt(G * G + 3 * G)) / 9
    return r_low, min(1.0, math.sqrt(r2_high))


def amplify_closed_form(inp: QubitVacuumInput, config: AmplifierConfig) -> AmplifierOutcome:
    r = config.r
    if config.policy is Policy.FEED_FORWARD:
        amps = np.array([0, inp.beta_h, inp.beta_v])
    else:
        k = _qubit_factor(r)
        amps = np.array([inp.alpha * r, k * inp.beta_h, k * inp.beta_v])
    p = success_probability(r, inp, config.policy)
    if p < ZERO_SUCCESS:
        raise ZeroSuccessError(f"heralding probability {p:.3g} at r={r}")
    out = QubitVacuumInput.normalize(*amps)
    return AmplifierOutcome(out, p, gain(r), nominal_gain(r, inp))


@dataclass(frozen=True)
class HeraldEvent:
    """Detector pattern accepted as success.

    ``fire`` modes must register a photon, ``quiet`` modes must stay dark.
    ``correction`` is applied to the conditional state (feed-forward).
    """

    name: str
    fire: tuple[ModeLabel, ...]
    quiet: tuple[ModeLabel, ...]
    correction: Callable[[StateVector], StateVector] | None = None

    def pattern(self) -> dict[ModeLabel, int]:
        """Ideal number-resolving pattern: one photon per firing mode, none elsewhere."""
        return {**{m: 1 for m in self.fire}, **{m: 0 for m in self.quiet}}


class HeraldedAmplifier(Protocol):
    """Interface a heralded amplifier exposes to the QKD simulation.

    ``evolve`` takes a state holding the signal in spatial mode ``signal`` and
    returns the state just before the heralding detectors, with the amplified
    signal in spatial mode ``output``.
    """

    output: str
    herald_modes: tuple[ModeLabel, ...]

    def evolve(self, state: StateVector, signal: str) -> StateVector: ...

    def herald_events(self) -> Sequence[HeraldEvent]: ...


def bell_ancilla(n_max: int = 4) -> StateVector:
    """(|H_a1 H_a2> + |V_a1 V_a2>)/sqrt(2)."""
    k = 1 / math.sqrt(2)
    return StateVector({FockState.of("H_a1", "H_a2"): k, FockState.of("V_a1", "V_a2"): k},
                       modes=[A1, A2], n_max=n_max)


def _flip_output_v(state: StateVector) -> StateVector:
    return phase_flip(state, OUT_V)


class EntangledQubitAmplifier:
    """The two-PPBS amplifier with a |Phi+> ancilla pair."""

    output = OUT
    herald_modes = (D1_D, D1_A, D2_D, D2_A)

    def __init__(self, r: float, policy: Policy = Policy.DD_AA_ONLY):
        self.config = AmplifierConfig(r, policy)

    @property
    def r(self) -> float:
        return self.config.r

    def evolve(self, state: StateVector, signal: str = "in", analyze: bool = True) -> StateVector:
        """Inject the ancilla pair and run the interferometer.

        With ``analyze`` the detector blocks are rotated to the D/A basis.
        """
        n_max = max(state.n_max, _max_photons(state) + 2)
        s = state.with_n_max(n_max).tensor(bell_ancilla(n_max)).with_modes([_VAC_PORT])
        s = pbs(s, signal, _VAC_PORT, _ARM1, _ARM2)
        s = ppbs1(s, self.r, signal=_ARM1, ancilla=A1, out=_ARM1_OUT, detector=D1)
        s = ppbs2(s, self.r, signal=_ARM2, ancilla=A2, out=_ARM2_OUT, detector=D2)
        s = pbs(s, _ARM2_OUT, _ARM1_OUT, _DUMP, OUT)
        if analyze:
            s = rotate_to_DA(rotate_to_DA(s.with_modes([D1, D2]), D1), D2)
        return s

    def herald_events(self) -> list[HeraldEvent]:
        events = [
            HeraldEvent("DD", (D1_D, D2_D), (D1_A, D2_A)),
            HeraldEvent("AA", (D1_A, D2_A), (D1_D, D2_D)),
        ]
        if self.config.policy is Policy.FEED_FORWARD:
            events += [
                HeraldEvent("DA", (D1_D, D2_A), (D1_A, D2_D), _flip_output_v),
                HeraldEvent("AD", (D1_A, D2_D), (D1_D, D2_A), _flip_output_v),
            ]
        return events

    def heralded_branches(self, state: StateVector, signal: str = "in") -> list[tuple[HeraldEvent, StateVector]]:
        """Ideal (number-resolving, lossless) heralding: unnormalized conditional states."""
        evolved = self.evolve(state, signal)
        out = []
        for ev in self.herald_events():
            rem, _ = project(evolved, ev.pattern())
            if ev.correction is not None:
                rem = ev.correction(rem)
            out.append((ev, rem))
        return out


def _max_photons(state: StateVector) -> int:
    return max((fs.total for fs in state), default=0)


def heralded_output(state: StateVector, amp: EntangledQubitAmplifier, signal: str = "in",
                    keep: Sequence[str] = (OUT,)) -> DensityMatrix:
    """Unnormalized heralded state on the spatial modes in ``keep``; its trace is the success probability."""
    branches = [s for _, s in amp.heralded_branches(state, signal)]
    rho = DensityMatrix.from_states(branches)
    drop = [m for m in rho.modes if m.spatial not in keep]
    return partial_trace(rho, drop) if drop else rho


def amplify_simulated(inp: QubitVacuumInput, config: AmplifierConfig) -> AmplifierOutcome:
    """Brute-force counterpart of :func:`amplify_closed_form`."""
    amp = EntangledQubitAmplifier(config.r, config.policy)
    rho = heralded_output(inp.as_state("in"), amp)
    p = rho.trace()
    if p < ZERO_SUCCESS:
        raise ZeroSuccessError(f"heralding probability {p:.3g} at r={config.r}")
    basis = [VACUUM, FockState({OUT_H: 1}), FockState({OUT_V: 1})]
    m = rho.to_array(basis) / p
    w, v = np.linalg.eigh(m)
    vec = v[:, -1]
    # fix the global phase on the largest component for reproducible output
    j = int(np.argmax(np.abs(vec)))
    vec = vec * abs(vec[j]) / vec[j]
    out = QubitVacuumInput.normalize(*vec)
    g_sim = _intensity_ratio(out) / _intensity_ratio(inp) if _defined(inp) and _defined(out, allow_inf=True) else gain(config.r)
    g_nom = out.qubit_weight / inp.qubit_weight if inp.qubit_weight > 0 else math.nan
    return AmplifierOutcome(out, p, g_sim, g_nom)


def _defined(q: QubitVacuumInput, allow_inf: bool = False) -> bool:
    if q.qubit_weight <= 0:
        return False
    return allow_inf or q.vacuum_weight > 0


def _intensity_ratio(q: QubitVacuumInput) -> float:
    return q.qubit_weight / q.vacuum_weight if q.vacuum_weight > 0 else math.inf


def sweep_gain_probability(inp: QubitVacuumInput, gain_grid: Sequence[float],
                           policy: Policy = Policy.DD_AA_ONLY) -> list[dict]:
    """For each target gain pick the reflectivity branch with the larger success probability.

    Rows hold ``gain, r, success_prob, nominal_gain`` and are sorted by gain.
    """
    rows = []
    for G in sorted(gain_grid):
        if G < 1:
            raise ParamError(f"gain grid value {G} < 1")
        candidates = [r for r in reflectivity_for_gain(G) if r is not None]
        if policy is Policy.FEED_FORWARD and math.isinf(G):
            best = 0.0
            p = success_probability(0.0, inp, policy)
        else:
            best = max(candidates, key=lambda r: success_probability(r, inp))
            p = success_probability(best, inp)
        rows.append({"gain": G, "r": best, "success_prob": p, "nominal_gain": nominal_gain(best, inp)})
    return rows
