"""Optical components, channels and detectors acting on Fock-space states.

Sign conventions: a component that fully reflects a polarization entering
from its second input applies a -1 (the same pattern as the ancilla port of
the partially polarizing splitters). Global phases never enter observables,
but a fixed convention keeps regression values stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ModeError, ParamError, ZeroSuccessError
from .fock import (
    DensityMatrix,
    FockState,
    ModeLabel,
    Pol,
    StateVector,
    apply_linear_map,
    partial_trace,
    pol_pair,
    project,
)


def _require(state: StateVector | DensityMatrix, *spatials: str):
    for s in spatials:
        if not any(m in state.modes for m in pol_pair(s)):
            raise ModeError(f"spatial mode {s!r} not in register")


def _check_unit_interval(name: str, x: float, *, open_low: bool = False):
    if not (0 <= x <= 1) or (open_low and x == 0) or math.isnan(x):
        raise ParamError(f"{name}={x} outside {'(0' if open_low else '[0'}, 1]")


def pbs(state: StateVector, in1: str, in2: str, out1: str, out2: str) -> StateVector:
    """Polarizing beam splitter: H transmitted (in1->out1, in2->out2), V reflected."""
    _require(state, in1, in2)
    h1, v1 = pol_pair(in1)
    h2, v2 = pol_pair(in2)
    oh1, ov1 = pol_pair(out1)
    oh2, ov2 = pol_pair(out2)
    return apply_linear_map(state, {
        h1: [(oh1, 1)],
        h2: [(oh2, 1)],
        v1: [(ov2, 1)],
        v2: [(ov1, -1)],
    })


def _ppbs(state, r, partial: Pol, signal, ancilla, out, detector):
    _check_unit_interval("r", r)
    _require(state, signal, ancilla)
    t = math.sqrt(1 - r * r)
    full = Pol.V if partial is Pol.H else Pol.H
    return apply_linear_map(state, {
        ModeLabel(signal, partial): [(ModeLabel(out, partial), r), (ModeLabel(detector, partial), t)],
        ModeLabel(ancilla, partial): [(ModeLabel(detector, partial), -r), (ModeLabel(out, partial), t)],
        ModeLabel(signal, full): [(ModeLabel(out, full), 1)],
        ModeLabel(ancilla, full): [(ModeLabel(detector, full), -1)],
    })


def ppbs1(state: StateVector, r: float, *, signal="in", ancilla="a1", out="out", detector="D1") -> StateVector:
    """Partially polarizing splitter: amplitude reflectivity ``r`` for H, V fully reflected.

    a†_{signal,H}  -> r a†_{out,H} + sqrt(1-r^2) a†_{det,H}
    a†_{ancilla,H} -> -r a†_{det,H} + sqrt(1-r^2) a†_{out,H}
    a†_{ancilla,V} -> -a†_{det,V},   a†_{signal,V} -> a†_{out,V}
    """
    return _ppbs(state, r, Pol.H, signal, ancilla, out, detector)


def ppbs2(state: StateVector, r: float, *, signal="in", ancilla="a2", out="out", detector="D2") -> StateVector:
    """As :func:`ppbs1` with the roles of H and V exchanged."""
    return _ppbs(state, r, Pol.V, signal, ancilla, out, detector)


def _fresh_env(modes, spatial: str) -> str:
    base = f"env[{spatial}]"
    name, k = base, 1
    taken = {m.spatial for m in modes}
    while name in taken:
        name = f"{base}{k}"
        k += 1
    return name


def lossy_dilation(state: StateVector, spatial: str, T: float, env: str = None) -> StateVector:
    """Beam-splitter model of loss keeping the environment mode in the register.

    Both polarizations of ``spatial`` leak into ``env`` with amplitude sqrt(1-T).
    """
    _check_unit_interval("T", T, open_low=True)
    _require(state, spatial)
    env = env or _fresh_env(state.modes, spatial)
    t, l = math.sqrt(T), math.sqrt(1 - T)
    mapping = {}
    for m, e in zip(pol_pair(spatial), pol_pair(env)):
        mapping[m] = [(m, t), (e, l)]
    return apply_linear_map(state, mapping)


def loss_channel(dm: DensityMatrix, spatial: str, T: float) -> DensityMatrix:
    """Amplitude-damping channel of intensity transmissivity ``T`` on a spatial mode."""
    _check_unit_interval("T", T, open_low=True)
    _require(dm, spatial)
    if T == 1:
        return dm
    env = _fresh_env(dm.modes, spatial)
    out = dm.map_states(lambda s: lossy_dilation(s.with_modes([spatial]), spatial, T, env))
    return partial_trace(out, [env]) if any(m.spatial == env for m in out.modes) else out


def coherent_attenuator(state: StateVector, spatial: str, nu: float) -> tuple[StateVector, float]:
    """Attenuate ``spatial`` by a splitter of transmissivity ``nu`` and keep only the
    events where the tapped-off port stays empty.

    Returns the renormalized state and the post-selection probability.
    """
    _check_unit_interval("nu", nu, open_low=True)
    tapped = lossy_dilation(state, spatial, nu, env=_fresh_env(state.modes, spatial))
    env_modes = tapped.modes - state.modes
    rem, prob = project(tapped, {m: 0 for m in env_modes})
    if prob == 0:
        raise ZeroSuccessError("attenuator post-selection has zero probability")
    return rem.normalized(), prob / state.norm_sq()


def rotate_polarization(state: StateVector, spatial: str, theta: float) -> StateVector:
    """Express ``spatial`` in the linear basis at angle ``theta``.

    After the call the H slot counts photons polarized along theta and the V
    slot those along theta + pi/2.
    """
    _require(state, spatial)
    h, v = pol_pair(spatial)
    c, s = math.cos(theta), math.sin(theta)
    return apply_linear_map(state, {h: [(h, c), (v, -s)], v: [(h, s), (v, c)]})


def rotate_to_DA(state: StateVector, spatial: str) -> StateVector:
    """Hadamard on the polarization of ``spatial``; H slot -> D, V slot -> A. Self-inverse."""
    _require(state, spatial)
    h, v = pol_pair(spatial)
    k = 1 / math.sqrt(2)
    return apply_linear_map(state, {h: [(h, k), (v, k)], v: [(h, k), (v, -k)]})


def phase_flip(state: StateVector, m: ModeLabel) -> StateVector:
    """a†_m -> -a†_m (e.g. the V -> -V feed-forward correction)."""
    return apply_linear_map(state, {m: [(m, -1)]})


@dataclass(frozen=True)
class ChannelSpec:
    transmissivity: float

    def __post_init__(self):
        _check_unit_interval("transmissivity", self.transmissivity, open_low=True)

    @classmethod
    def from_loss_db(cls, loss_db: float) -> "ChannelSpec":
        if loss_db < 0:
            raise ParamError(f"loss {loss_db} dB is negative")
        return cls(10 ** (-loss_db / 10))


class DetectorKind(str, Enum):
    BUCKET = "bucket"
    PNR = "photon_number_resolving"


@dataclass(frozen=True)
class DetectorModel:
    """Lossy detector: ideal counter behind a splitter of transmissivity ``efficiency``,
    plus an independent dark click with probability ``dark_count_prob`` per gate."""

    kind: DetectorKind = DetectorKind.BUCKET
    efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind(self.kind))
        _check_unit_interval("efficiency", self.efficiency)
        if not (0 <= self.dark_count_prob < 1):
            raise ParamError(f"dark_count_prob={self.dark_count_prob} outside [0, 1)")

    def no_click_prob(self, n: int) -> float:
        return (1 - self.dark_count_prob) * (1 - self.efficiency) ** n

    def click_prob(self, n: int) -> float:
        return 1 - self.no_click_prob(n)

    def count_probs(self, n: int) -> np.ndarray:
        """P(k registered counts | n photons), k = 0..n+1 (the last from a dark count)."""
        eta, pd = self.efficiency, self.dark_count_prob
        det = np.array([math.comb(n, k) * eta ** k * (1 - eta) ** (n - k) for k in range(n + 1)] + [0.0])
        out = (1 - pd) * det
        out[1:] += pd * det[:-1]
        return out

    def outcomes(self, n_max: int) -> list:
        if self.kind is DetectorKind.BUCKET:
            return ["click", "no_click"]
        return list(range(n_max + 2))

    def outcome_prob(self, outcome, n: int) -> float:
        if self.kind is DetectorKind.BUCKET:
            if outcome == "click":
                return self.click_prob(n)
            if outcome == "no_click":
                return self.no_click_prob(n)
            raise ValueError(f"unknown bucket outcome {outcome!r}")
        probs = self.count_probs(n)
        return float(probs[outcome]) if 0 <= outcome < len(probs) else 0.0


def detect(dm: DensityMatrix, mode: ModeLabel, model: DetectorModel) -> dict:
    """Measure one mode. Returns ``{outcome: (probability, conditional state)}``.

    The conditional state has the detected mode traced out and is normalized,
    or ``None`` when the outcome has zero probability.
    """
    if mode not in dm.modes:
        raise ModeError(f"mode {mode} not in register")
    counts = np.array([fs[mode] for fs in dm.basis], dtype=int)
    n_top = int(counts.max()) if len(counts) else 0
    result = {}
    for outcome in model.outcomes(n_top):
        w = np.array([model.outcome_prob(outcome, n) for n in counts])
        weighted = DensityMatrix(dm.basis, dm.matrix * w[:, None], dm.modes)
        cond = partial_trace(weighted, [mode])
        prob = cond.trace() / dm.trace()
        result[outcome] = (prob, cond.normalized() if prob > 0 else None)
    return result


def basis_state(*labels: str, modes=(), n_max: int = 4) -> StateVector:
    """Convenience: normalized single basis state, e.g. ``basis_state("H_in")``."""
    return StateVector({FockState.of(*labels): 1.0}, modes, n_max)
