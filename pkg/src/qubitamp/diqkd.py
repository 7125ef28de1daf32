"""Device-independent QKD with a heralded amplifier in front of Bob's Bell test.

Pipeline per laser pulse: a polarization-entangled SPDC source sends one
mode to Alice and one through a lossy channel to Bob; Bob's mode enters the
amplifier, whose heralding detectors are lossy, noisy bucket detectors. On a
herald both sides run a CHSH test with number-resolving detectors. The key
rate per pulse is R = mu_cc [1 - h(Q) - I_E(S, mu)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .amplifier import ZERO_SUCCESS, EntangledQubitAmplifier, Policy
from .elements import ChannelSpec, DetectorKind, DetectorModel, lossy_dilation, rotate_polarization
from .entanglement import binary_entropy
from .errors import ParamError, ZeroSuccessError
from .fock import DensityMatrix, FockState, StateVector, partial_trace, pol_pair, split_by_pattern

ALICE = "A"
BOB = "B"
TSIRELSON = 2 * math.sqrt(2)
DETECTOR_EFFICIENCY = 0.95 * 0.91


@dataclass(frozen=True)
class SourceModel:
    pair_prob: float = 2e-3
    truncation: int = 2

    def __post_init__(self):
        if not 0 < self.pair_prob < 1:
            raise ParamError(f"pair_prob={self.pair_prob} outside (0, 1)")
        if int(self.truncation) != self.truncation or self.truncation < 2:
            raise ParamError(f"truncation={self.truncation} must be an integer >= 2")
        self.pair_weights()

    def pair_weights(self) -> np.ndarray:
        """Normalized weights of the 0..truncation pair terms.

        The unnormalized weights (n + 1) x^n are those of a two-polarization
        squeezer; x is chosen so that the single-pair weight equals pair_prob.
        """
        n = np.arange(self.truncation + 1)

        def weights(x):
            w = (n + 1) * x ** n
            return w / w.sum()

        top = weights(1.0)[1]
        if self.pair_prob >= top:
            raise ParamError(f"pair_prob={self.pair_prob} unreachable with {self.truncation} pairs (max {top:.3g})")
        x = brentq(lambda x: weights(x)[1] - self.pair_prob, 0.0, 1.0, xtol=1e-300, rtol=1e-15)
        return weights(x)


@dataclass(frozen=True)
class CHSHSettings:
    """Analyzer angles in radians (linear polarization, H = 0)."""

    alice: tuple[float, float] = (0.0, math.pi / 4)
    bob: tuple[float, float] = (math.pi / 8, -math.pi / 8)
    key: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("alice", "bob", "key"):
            angles = tuple(float(a) for a in getattr(self, name))
            if len(angles) != 2 or not all(math.isfinite(a) for a in angles):
                raise ParamError(f"{name} angles must be two finite numbers, got {angles}")
            object.__setattr__(self, name, angles)


def reference_herald_detectors(dark_count_prob: float = 1e-10) -> DetectorModel:
    return DetectorModel(DetectorKind.BUCKET, DETECTOR_EFFICIENCY, dark_count_prob)


def reference_bell_detectors() -> DetectorModel:
    return DetectorModel(DetectorKind.PNR, DETECTOR_EFFICIENCY, 0.0)


@dataclass(frozen=True)
class ProtocolParams:
    source: SourceModel = field(default_factory=SourceModel)
    channel_loss_db: float = 0.0
    herald_detectors: DetectorModel = field(default_factory=reference_herald_detectors)
    bell_detectors: DetectorModel = field(default_factory=reference_bell_detectors)
    amplifier_r: float = 0.0
    measurement_settings: CHSHSettings = field(default_factory=CHSHSettings)

    def __post_init__(self):
        if not (self.channel_loss_db >= 0 and math.isfinite(self.channel_loss_db)):
            raise ParamError(f"channel_loss_db={self.channel_loss_db} must be finite and >= 0")
        if not 0 <= self.amplifier_r <= 1:
            raise ParamError(f"amplifier_r={self.amplifier_r} outside [0, 1]")
        if self.bell_detectors.kind is not DetectorKind.PNR:
            raise ParamError("Bell-test detectors must be photon-number resolving")

    @property
    def transmissivity(self) -> float:
        return ChannelSpec.from_loss_db(self.channel_loss_db).transmissivity


@dataclass(frozen=True)
class RatePoint:
    mu_cc: float
    Q: float
    S: float
    mu: float
    R: float

    @property
    def secure(self) -> bool:
        return self.R > 0


def spdc_state(source: SourceModel) -> StateVector:
    """sum_n sqrt(w_n) |Phi_n> with |Phi_n> = sum_k |k_H (n-k)_V>_A |k_H (n-k)_V>_B / sqrt(n+1)."""
    ah, av = pol_pair(ALICE)
    bh, bv = pol_pair(BOB)
    terms = {}
    for n, w in enumerate(source.pair_weights()):
        amp = math.sqrt(w / (n + 1))
        for k in range(n + 1):
            fs = FockState({ah: k, av: n - k, bh: k, bv: n - k})
            terms[fs] = terms.get(fs, 0) + amp
    return StateVector(terms, modes=(ah, av, bh, bv), n_max=2 * source.truncation)


@lru_cache(maxsize=4096)
def _herald_branches(source: SourceModel, transmissivity: float, r: float) -> tuple:
    """Alice/output states conditioned on each herald-mode occupation pattern.

    Returns ``(herald_modes, events, branches)`` where ``branches`` maps a
    pattern to the (unnormalized) density matrix on Alice's and the output
    modes, every other mode traced out. Independent of detector models.
    """
    amp = EntangledQubitAmplifier(r, Policy.DD_AA_ONLY)
    state = spdc_state(source)
    if transmissivity < 1:
        state = lossy_dilation(state, BOB, transmissivity)
    evolved = amp.evolve(state, signal=BOB)
    events = tuple((tuple(ev.fire), tuple(ev.quiet)) for ev in amp.herald_events())
    keep = {ALICE, amp.output}
    branches = {}
    for pattern, sub in sorted(split_by_pattern(evolved, amp.herald_modes).items()):
        rho = DensityMatrix.from_states([sub])
        drop = [m for m in rho.modes if m.spatial not in keep]
        branches[pattern] = partial_trace(rho, drop) if drop else rho
    return amp.herald_modes, events, branches


def herald(params: ProtocolParams) -> tuple[DensityMatrix, float]:
    """Joint Alice/Bob state given a herald, and the herald probability per pulse."""
    modes, events, branches = _herald_branches(params.source, params.transmissivity, params.amplifier_r)
    det = params.herald_detectors
    index = {m: i for i, m in enumerate(modes)}
    total = None
    for pattern, rho in branches.items():
        w = 0.0
        for fire, quiet in events:
            w += (math.prod(det.click_prob(pattern[index[m]]) for m in fire)
                  * math.prod(det.no_click_prob(pattern[index[m]]) for m in quiet))
        if w <= 0:
            continue
        total = rho * w if total is None else total + rho * w
    prob = total.trace() if total is not None else 0.0
    if prob < ZERO_SUCCESS:
        raise ZeroSuccessError(f"herald probability {prob:.3g} at {params.channel_loss_db} dB, r={params.amplifier_r}")
    return total.normalized(), prob


def _count_distribution(rho: DensityMatrix, theta_a: float, theta_b: float, output: str) -> dict:
    """Ideal photon counts (n_AH, n_AV, n_BH, n_BV) after rotating both analyzers."""
    rotated = rho.map_states(lambda s: rotate_polarization(
        rotate_polarization(s.with_modes([ALICE, output]), ALICE, theta_a), output, theta_b))
    ah, av = pol_pair(ALICE)
    bh, bv = pol_pair(output)
    dist = {}
    for fs, p in rotated.diagonal().items():
        key = (fs[ah], fs[av], fs[bh], fs[bv])
        dist[key] = dist.get(key, 0.0) + float(p)
    return dist


def _side_outcomes(det: DetectorModel, n_h: int, n_v: int) -> tuple[float, float, float]:
    """(P(+1), P(-1), P(inconclusive)) for one analyzer with n_h, n_v photons in its ports."""
    ph, pv = det.count_probs(n_h), det.count_probs(n_v)
    plus = ph[1] * pv[0]
    minus = ph[0] * pv[1]
    return plus, minus, max(0.0, 1.0 - plus - minus)


def _setting_stats(rho: DensityMatrix, theta_a: float, theta_b: float, det: DetectorModel,
                   output: str) -> tuple[float, float, float]:
    """(binned correlator, P(conclusive both), P(error | conclusive both)) for one setting.

    Binned: an inconclusive result is read as +1.
    """
    corr = cc = err = 0.0
    for (nah, nav, nbh, nbv), p in _count_distribution(rho, theta_a, theta_b, output).items():
        if p <= 0:
            continue
        a_plus, a_minus, a_inc = _side_outcomes(det, nah, nav)
        b_plus, b_minus, b_inc = _side_outcomes(det, nbh, nbv)
        a_bin, b_bin = a_plus + a_inc, b_plus + b_inc
        corr += p * (a_bin - a_minus) * (b_bin - b_minus)
        cc += p * (a_plus + a_minus) * (b_plus + b_minus)
        err += p * (a_plus * b_minus + a_minus * b_plus)
    total = rho.trace()
    return corr / total, cc / total, err / cc if cc > 0 else 0.5


def chsh_and_qber(joint_state: DensityMatrix, params: ProtocolParams, output: str = "out") -> tuple[float, float, float]:
    """CHSH value S (inconclusive binned to +1), QBER Q on conclusive pairs in the key
    basis, and mu = inconclusive / conclusive ratio in the key basis."""
    det = params.bell_detectors
    ang = params.measurement_settings
    e = [[_setting_stats(joint_state, ta, tb, det, output)[0] for tb in ang.bob] for ta in ang.alice]
    S = abs(e[0][0] + e[0][1] + e[1][0] - e[1][1])
    _, cc, Q = _setting_stats(joint_state, ang.key[0], ang.key[1], det, output)
    mu = (1 - cc) / cc if cc > 0 else math.inf
    return float(min(S, TSIRELSON)), float(min(max(Q, 0.0), 0.5)), float(mu)


def holevo_chsh_bound(S: float, mu: float = 0.0) -> float:
    """Eve's information from the collective-attack CHSH bound; mu enters only through S."""
    if S <= 2:
        return 1.0
    x = math.sqrt(max((min(S, TSIRELSON) / 2) ** 2 - 1, 0.0))
    return binary_entropy((1 + x) / 2)


EveBound = Callable[[float, float], float]


def key_rate(mu_cc: float, Q: float, S: float, mu: float, eve_bound: EveBound = holevo_chsh_bound) -> RatePoint:
    """R = mu_cc [1 - h(Q) - I_E(S, mu)], clamped at zero."""
    if not 0 <= Q <= 0.5:
        raise ParamError(f"Q={Q} outside [0, 1/2]")
    if not 0 <= S <= TSIRELSON + 1e-9:
        raise ParamError(f"S={S} outside [0, 2 sqrt 2]")
    if mu < 0:
        raise ParamError(f"mu={mu} negative")
    R = mu_cc * (1 - binary_entropy(Q) - eve_bound(S, mu))
    return RatePoint(float(mu_cc), float(Q), float(S), float(mu), float(max(R, 0.0)))


def rate_point(params: ProtocolParams, eve_bound: EveBound = holevo_chsh_bound) -> RatePoint:
    """End-to-end key rate for one configuration."""
    try:
        rho, p_herald = herald(params)
    except ZeroSuccessError:
        return RatePoint(0.0, 0.5, 0.0, math.inf, 0.0)
    S, Q, mu = chsh_and_qber(rho, params)
    mu_cc = p_herald / (1 + mu) if math.isfinite(mu) else 0.0
    return key_rate(mu_cc, Q, S, mu, eve_bound)


def default_r_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-3, 0, 50)])


def optimize_reflectivity(params: ProtocolParams, r_grid: Sequence[float] | None = None,
                          eve_bound: EveBound = holevo_chsh_bound) -> tuple[float, RatePoint]:
    """Best key rate over the reflectivity grid; ties (including all-zero) go to the smaller r.

    When no r gives a positive rate the result is (0, point at r = 0) and
    ``point.secure`` is False.
    """
    grid = sorted(float(r) for r in (default_r_grid() if r_grid is None else r_grid))
    if not grid:
        raise ParamError("empty reflectivity grid")
    best_r, best = grid[0], None
    for r in grid:
        point = rate_point(replace(params, amplifier_r=r), eve_bound)
        if best is None or point.R > best.R:
            best_r, best = r, point
    return best_r, best


def keyrate_vs_loss(params: ProtocolParams, loss_grid_db: Sequence[float], r_grid: Sequence[float] | None = None,
                    eve_bound: EveBound = holevo_chsh_bound, map_fn=map) -> list[dict]:
    """Rows (loss_db, r_star, mu_cc, Q, S, mu, R), one per loss value, in grid order."""
    losses = [float(x) for x in loss_grid_db]
    if not losses:
        raise ParamError("empty loss grid")
    jobs = [(replace(params, channel_loss_db=L), r_grid, eve_bound) for L in losses]
    results = list(map_fn(_optimize_job, jobs))
    return [{"loss_db": L, "r_star": r, "mu_cc": pt.mu_cc, "Q": pt.Q, "S": pt.S, "mu": pt.mu, "R": pt.R}
            for L, (r, pt) in zip(losses, results)]


def _optimize_job(job):
    params, r_grid, eve_bound = job
    return optimize_reflectivity(params, r_grid, eve_bound)
