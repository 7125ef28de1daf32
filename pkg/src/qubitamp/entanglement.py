"""Entanglement of dual-rail states degraded by loss and restored by amplification.

The states studied here are

    rho(alpha, p) = (1-p)|00><00| + p|Psi_alpha><Psi_alpha|,
    |Psi_alpha>  = sqrt(alpha)|0 psi> + sqrt(1-alpha)|psi 0>,

where the second arm is the one sent through the lossy channel and through
the amplifier. Writing 0 for vacuum and 1 for the photon, each arm is a qubit
and every quantity below lives on a 4x4 matrix in the basis |00>,|01>,|10>,|11>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import least_squares, minimize_scalar, root

from .amplifier import EntangledQubitAmplifier, heralded_output, low_branch_r2
from .elements import lossy_dilation
from .errors import NumericError, ParamError
from .fock import VACUUM, FockState, StateVector, mode
from .optimize import golden_section_max, log_golden_section_max

REE_TOL = 1e-6


@dataclass(frozen=True)
class AmplitudeDampedState:
    alpha: float
    p: float

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.p <= 1):
            raise ParamError(f"(alpha, p) = ({self.alpha}, {self.p}) outside [0,1]^2")

    def density_matrix(self) -> np.ndarray:
        rho = np.zeros((4, 4))
        rho[0, 0] = 1 - self.p
        psi = np.array([0.0, math.sqrt(self.alpha), math.sqrt(1 - self.alpha), 0.0])
        return rho + self.p * np.outer(psi, psi)


class Measure(str, Enum):
    NEGATIVITY = "negativity"
    CONCURRENCE = "concurrence"
    REE = "ree"


@dataclass(frozen=True)
class Measures:
    concurrence: float
    negativity: float
    log_negativity: float
    ree: float | None = None


@dataclass(frozen=True)
class DistillationPoint:
    T: float
    G: float
    N_norm: float
    measures: Measures
    success_prob: float


def _check_T(T: float):
    if not 0 < T <= 1:
        raise ParamError(f"transmissivity T={T} outside (0, 1]")


def _check_G(G: float):
    if not G >= 1:
        raise ParamError(f"gain G={G} must be >= 1")


def lossy_state(T: float) -> AmplitudeDampedState:
    """(|psi 0> + |0 psi>)/sqrt(2) after the second arm crosses a channel of transmissivity T."""
    _check_T(T)
    return AmplitudeDampedState(T / (T + 1), (T + 1) / 2)


def amplify_damped(s: AmplitudeDampedState, G: float) -> tuple[AmplitudeDampedState, float]:
    """Noiseless amplification of the second arm with gain G.

    Returns the renormalized state and the factor D with success probability
    r^2 * D: D = 1 + p*alpha*(G-1) is the post-amplification norm divided by r^2.
    """
    a, p = s.alpha, s.p
    if math.isinf(G):
        return AmplitudeDampedState(1.0 if a > 0 else 0.0, p if a > 0 else 0.0), math.inf
    D = 1 + p * a * (G - 1)
    return AmplitudeDampedState(G * a / (1 - a + G * a), p * (1 - a + G * a) / D), D


def normalization(T: float, G: float) -> float:
    """N = 2 / (2 + GT - T)."""
    return 2 / (2 + G * T - T)


def amplified_state(T: float, G: float) -> tuple[AmplitudeDampedState, float]:
    _check_T(T)
    _check_G(G)
    N = normalization(T, G)
    return AmplitudeDampedState(G * T / (G * T + 1), N * (G * T + 1) / 2), N


def concurrence(s: AmplitudeDampedState) -> float:
    return 2 * s.p * math.sqrt(s.alpha * (1 - s.alpha))


def negativity(s: AmplitudeDampedState) -> float:
    c = concurrence(s)
    q = 1 - s.p
    return 0.5 * (math.hypot(q, c) - q)


def log_negativity(s: AmplitudeDampedState) -> float:
    return math.log2(2 * negativity(s) + 1)


# generic two-qubit measures on 4x4 matrices, used as independent checks

_SYSY = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])


def concurrence_of_matrix(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    The Wootters lambdas are the singular values of sqrt(rho) Y sqrt(rho)^*,
    which avoids square roots of round-off sized eigenvalues for low-rank rho.
    """
    w, v = np.linalg.eigh(rho)
    w = np.where(w > 1e-13, w, 0.0)
    root_rho = (v * np.sqrt(w)) @ v.conj().T
    ev = np.linalg.svd(root_rho @ _SYSY @ root_rho.conj(), compute_uv=False)
    return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))


def partial_transpose_2q(rho: np.ndarray) -> np.ndarray:
    """Transpose of the second qubit."""
    return rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def negativity_of_matrix(rho: np.ndarray) -> float:
    """Sum of |negative eigenvalues| of the partial transpose."""
    ev = np.linalg.eigvalsh(partial_transpose_2q(rho))
    return float(-ev[ev < 0].sum())


def _xlog2x(x: np.ndarray) -> float:
    x = x[x > 1e-300]
    return float(np.sum(x * np.log2(x)))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """S(rho || sigma) in bits; +inf when supp(rho) is not inside supp(sigma)."""
    lam, vec = np.linalg.eigh(sigma)
    overlap = np.einsum("ij,jk,ki->i", vec.conj().T, rho, vec).real
    if np.any((lam <= 1e-300) & (overlap > 1e-14)):
        return math.inf
    mask = lam > 1e-300
    cross = float(np.sum(overlap[mask] * np.log2(lam[mask])))
    return _xlog2x(np.linalg.eigvalsh(rho)) - cross


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _sigma(a, b, c, d, z) -> np.ndarray:
    s = np.diag([a, b, c, d]).astype(float)
    s[1, 2] = s[2, 1] = z
    return s


def _log_mean(x: float, y: float) -> float:
    if x <= 0 or y <= 0:
        return 0.0
    if abs(x - y) <= 1e-9 * max(x, y):
        return 0.5 * (x + y)
    return (x - y) / (math.log(x) - math.log(y))


def _clip(x: float, bound: float = 600.0) -> float:
    return max(-bound, min(bound, float(x)))


def _kkt_sigma(t: float, w: float, p: float):
    """Candidate closest separable state on the PPT boundary and the state it is closest to.

    The candidate has weights a, d on |00>, |11> with a d = z^2 and a block
    B = [[b, z], [z, c]] on |01>, |10>. B is parametrized by the log ratio t
    of its eigenvalues and by w, with cos(2 theta) = sech(w) and
    sin(2 theta) = tanh(w) for the eigenvector angle theta. The off-diagonal
    constraint then fixes d, and the stationarity condition of the relative
    entropy gives the unique block of rho (in the |01>, |10> basis) whose
    closest separable state is the candidate. Both coordinates stay of order
    ten even when B is nearly singular.
    """
    t, w = _clip(t), _clip(w)
    c2, s2 = 1 / math.cosh(w), math.tanh(w)
    k = math.tanh(t / 2) * s2
    lin = 4 * (1 - p) + 4 * p * k * k
    d = 2 * k * k * p * p / (lin + math.sqrt(lin * lin + 16 * (1 - k * k) * k * k * p * p))
    a = d + 1 - p
    z = math.copysign(math.sqrt(a * d), k)
    q = p - 2 * d
    l1, l2 = q / (1 + math.exp(-t)), q / (1 + math.exp(t))
    kappa = z / a
    # rho block in the eigenbasis of B
    m00 = l1 * (1 + kappa * s2)
    m11 = l2 * (1 - kappa * s2)
    m01 = kappa * c2 * _log_mean(l1, l2)
    th = 0.5 * math.atan2(s2, c2)
    co, si = math.cos(th), math.sin(th)
    r00 = co * co * m00 - 2 * co * si * m01 + si * si * m11
    r01 = co * si * (m00 - m11) + (co * co - si * si) * m01
    b = co * co * l1 + si * si * l2
    c = si * si * l1 + co * co * l2
    return (a, b, c, d, z), (r00, r01)


def _ree_closed(alpha: float, p: float) -> float | None:
    """Cases with an explicit closest separable state, else None."""
    if p <= 0 or alpha <= 0 or alpha >= 1:
        return 0.0
    if log_negativity(AmplitudeDampedState(alpha, p)) < 1e-15:
        # the REE never exceeds the log-negativity
        return 0.0
    if p >= 1:
        return binary_entropy(alpha)
    if alpha == 0.5:
        a, d = (1 - p / 2) ** 2, p * p / 4
        z = math.sqrt(a * d)
        return relative_entropy(AmplitudeDampedState(0.5, p).density_matrix(), _sigma(a, z, z, d, z))
    return None


def _ree_kkt(alpha: float, p: float) -> tuple[float, dict]:
    """Solve the optimality conditions for (t, w) from a grid of starts.

    The state for 1 - alpha is the swap of the one for alpha and the swap
    preserves separability, so only alpha > 1/2 is solved. Every converged
    root is a stationary point; the smallest resulting distance is kept.
    """
    m = min(alpha, 1 - alpha)
    al = 1 - m
    target = (al, math.sqrt(m * al))
    rho = AmplitudeDampedState(alpha, p).density_matrix()

    def residual(x):
        _, (r00, r01) = _kkt_sigma(x[0], x[1], p)
        return [r00 / p - target[0], r01 / p - target[1]]

    starts = [(t0, w0) for t0 in (math.log1p(-m) - math.log(m) + 1e-3, 0.3, 1.0, 3.0, 10.0, 30.0)
              for w0 in (0.01, 0.1, 1.0, 3.0, 10.0)]
    best, best_err = None, math.inf
    # second pass polishes by least squares, only if plain Newton steps found nothing
    for polish in (False, True):
        for x0 in starts:
            if polish:
                x = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15).x
            else:
                x = root(residual, x0, method="hybr", options={"xtol": 1e-14}).x
            err = float(np.hypot(*residual(x)))
            best_err = min(best_err, err)
            if err < 1e-11:
                params, _ = _kkt_sigma(x[0], x[1], p)
                if alpha < 0.5:
                    a, b, c, d, z = params
                    params = (a, c, b, d, z)
                value = relative_entropy(rho, _sigma(*params))
                if best is None or value < best[0] - 1e-13:
                    best = (value, params, err)
        if best is not None:
            break
    if best is None:
        raise NumericError("closest-separable-state equations did not converge",
                           {"alpha": alpha, "p": p, "residual": best_err})
    value, params, err = best
    return value, {"residual": err, "sigma": params}


def _block_log_expectation(alpha: float, b: float, c: float, z: float) -> float:
    """<psi| ln B |psi> for psi = (sqrt(alpha), sqrt(1-alpha)) and B = [[b, z], [z, c]]."""
    r = math.hypot(0.5 * (b - c), z)
    hi = 0.5 * (b + c) + r
    if hi <= 0:
        return -math.inf
    lo = (b * c - z * z) / hi
    phi = 0.5 * math.atan2(2 * z, b - c)
    w_hi = (math.sqrt(alpha) * math.cos(phi) + math.sqrt(1 - alpha) * math.sin(phi)) ** 2
    w_lo = 1 - w_hi
    out = w_hi * math.log(hi)
    if w_lo > 1e-300:
        out += w_lo * math.log(lo) if lo > 0 else -math.inf
    return out


def ree_direct(s: AmplitudeDampedState) -> float:
    """Relative entropy of entanglement by direct constrained minimization.

    Phase twirling on each arm maps any separable state to one with weights
    a, d on |00>, |11> and a real block [[b, z], [z, c]] on |01>, |10>,
    without increasing the distance to rho. For two qubits separability is
    z^2 <= a d, and at the minimum d = z^2 / a. The remaining problem in
    (a, z, b) is jointly convex, so nested bounded scalar minimizations reach
    the global minimum.
    """
    closed = _ree_closed(s.alpha, s.p)
    if closed is not None and not (s.alpha == 0.5 and 0 < s.p < 1):
        return closed
    alpha, p = s.alpha, s.p

    def cross(a, z, b):
        c = 1 - a - z * z / a - b
        return -(1 - p) * math.log(a) - p * _block_log_expectation(alpha, b, c, z)

    def over_b(a, z):
        w = 1 - a - z * z / a
        gap = math.sqrt(max(w * w / 4 - z * z, 0.0))
        if gap == 0:
            return cross(a, z, w / 2), w / 2
        res = minimize_scalar(lambda b: cross(a, z, b), bounds=(w / 2 - gap, w / 2 + gap),
                              method="bounded", options={"xatol": 1e-11 * gap})
        return res.fun, res.x

    def over_z(a):
        z_max = math.sqrt(a) - a
        res = minimize_scalar(lambda z: over_b(a, z)[0], bounds=(0.0, z_max),
                              method="bounded", options={"xatol": 1e-11 * z_max})
        return res.fun, res.x

    res = minimize_scalar(lambda a: over_z(a)[0], bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    a = float(res.x)
    z = float(over_z(a)[1])
    b = float(over_b(a, z)[1])
    d = z * z / a
    value = relative_entropy(s.density_matrix(), _sigma(a, b, 1 - a - d - b, d, z))
    if not np.isfinite(value):
        raise NumericError("direct REE minimization failed", {"alpha": alpha, "p": p})
    return value


def relative_entropy_of_entanglement(s: AmplitudeDampedState) -> float:
    """REE in bits, from the optimality conditions of the closest separable state.

    Falls back to :func:`ree_direct` if the root search does not converge.
    """
    closed = _ree_closed(s.alpha, s.p)
    if closed is not None:
        return closed
    try:
        value, _ = _ree_kkt(s.alpha, s.p)
        return value
    except NumericError as exc:
        try:
            return ree_direct(s)
        except NumericError:
            raise exc


def measures(s: AmplitudeDampedState, with_ree: bool = False) -> Measures:
    return Measures(concurrence(s), negativity(s), log_negativity(s),
                    relative_entropy_of_entanglement(s) if with_ree else None)


def _measure_fn(measure: Measure):
    return {
        Measure.NEGATIVITY: negativity,
        Measure.CONCURRENCE: concurrence,
        Measure.REE: relative_entropy_of_entanglement,
    }[measure]


def optimal_gain(T: float, measure: Measure | str = Measure.NEGATIVITY, tol: float = REE_TOL) -> float:
    """Gain maximizing the chosen entanglement measure after a channel of transmissivity T."""
    _check_T(T)
    measure = Measure(measure)
    if measure is Measure.NEGATIVITY:
        return (2 - T - math.sqrt(2 - T) * (T - 1)) / T
    if measure is Measure.CONCURRENCE:
        return (2 - T) / T
    fn = _measure_fn(measure)
    g, _ = golden_section_max(lambda G: fn(amplified_state(T, G)[0]), 1.0, 10.0 / T, tol)
    return g


def distill_success_probability(T: float, G: float) -> float:
    """r^2 / N with r on the low branch of the gain law; G = inf gives the limit T/8."""
    _check_T(T)
    if math.isinf(G):
        return T / 8
    _check_G(G)
    return low_branch_r2(G) / normalization(T, G)


def distillation_point(T: float, G: float, with_ree: bool = True) -> DistillationPoint:
    s, N = amplified_state(T, G)
    return DistillationPoint(T, G, N, measures(s, with_ree), distill_success_probability(T, G))


def simulate_distillation(T: float, G: float, local: str = "L") -> tuple[np.ndarray, float]:
    """Fock-space run of loss then amplification on (|0 psi> + |psi 0>)/sqrt(2).

    The photon is H polarized; ``local`` is the arm that stays put. Returns the
    heralded 4x4 state in the basis |00>, |01>, |10>, |11> (local arm first)
    and the heralding probability.
    """
    _check_T(T)
    _check_G(G)
    r = 0.0 if math.isinf(G) else math.sqrt(low_branch_r2(G))
    k = 1 / math.sqrt(2)
    state = StateVector({FockState.of(f"H_{local}"): k, FockState.of("H_in"): k}, modes=[local, "in"])
    if T < 1:
        state = lossy_dilation(state, "in", T)
    amp = EntangledQubitAmplifier(r)
    rho = heralded_output(state, amp, "in", keep=(local, amp.output))
    h_loc, h_out = mode(local, "H"), mode(amp.output, "H")
    basis = [VACUUM, FockState({h_out: 1}), FockState({h_loc: 1}), FockState({h_loc: 1, h_out: 1})]
    prob = rho.trace()
    return rho.to_array(basis).real / prob, prob


def attenuated_lossy_state(nu: float, T: float) -> tuple[AmplitudeDampedState, float]:
    """Coherently attenuate the channel arm by nu, then send it through T.

    Returns the damped state and the attenuator's post-selection probability
    (1 + nu)/2 for the balanced input.
    """
    if not 0 < nu <= 1:
        raise ParamError(f"attenuation nu={nu} outside (0, 1]")
    _check_T(T)
    x = nu * T
    return AmplitudeDampedState(x / (1 + x), (1 + x) / (1 + nu)), (1 + nu) / 2


def attenuated_amplified(nu: float, T: float, G: float) -> tuple[AmplitudeDampedState, float]:
    """Attenuate, transmit, amplify. Returns the state and the joint success probability."""
    s, p_att = attenuated_lossy_state(nu, T)
    _check_G(G)
    out, D = amplify_damped(s, G)
    return out, p_att * low_branch_r2(G) * D


def default_gain_cap(nu: float, T: float) -> float:
    return max(10.0, 100.0 / (nu * T))


def best_negativity_gain(nu: float, T: float, g_cap: float = None) -> tuple[float, float]:
    """Gain maximizing negativity for the attenuated state; returns (G, N)."""
    g_cap = g_cap or default_gain_cap(nu, T)
    s, _ = attenuated_lossy_state(nu, T)
    return log_golden_section_max(lambda G: negativity(amplify_damped(s, G)[0]), 1.0, g_cap, 1e-10)


def efficiency_objective(nu: float, T: float, G: float) -> float:
    """Success probability times negativity."""
    s, p = attenuated_amplified(nu, T, G)
    return p * negativity(s)


def entangling_efficiency(T: float, nu_grid=None, g_cap: float = 1e3) -> tuple[float, tuple[float, float]]:
    """max over (nu, G) of P_succ * N; returns (E_eff, (nu*, G*)).

    For every nu on the grid the gain is optimized by golden section in log G;
    ties on nu go to the larger value.
    """
    _check_T(T)
    nu_grid = np.linspace(0.01, 1.0, 100) if nu_grid is None else np.asarray(nu_grid, dtype=float)
    best = (-math.inf, (math.nan, math.nan))
    for nu in sorted(nu_grid, reverse=True):
        G, val = log_golden_section_max(lambda G: efficiency_objective(nu, T, G), 1.0, g_cap, 1e-10)
        if val > best[0]:
            best = (float(val), (float(nu), float(G)))
    if not np.isfinite(best[0]):
        raise NumericError("entangling efficiency search failed", {"T": T})
    return best


def tradeoff_curve(T: float, nu_grid) -> list[dict]:
    """Best negativity over G for each attenuation, with the joint success probability."""
    _check_T(T)
    rows = []
    for nu in nu_grid:
        G, N = best_negativity_gain(nu, T)
        _, p = attenuated_amplified(nu, T, G)
        rows.append({"T": T, "nu": float(nu), "gain": G, "negativity": N, "success_prob": p})
    return rows
