"""Truncated multimode bosonic states in the occupation-number basis.

States are sparse maps from basis states to complex amplitudes. Linear optical
elements act by rewriting creation operators, so every transformation here is
expressed as a linear map on the operators ``a†_m`` rather than as a dense
matrix on the (huge) truncated Fock space.

All values are immutable; operations return new objects.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ModeError, TruncationError, UnitaryError

DEFAULT_N_MAX = 4
PRUNE_THRESHOLD = 1e-15


class Pol(str, Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True, order=True)
class ModeLabel:
    """One bosonic mode: a spatial path together with a polarization."""

    spatial: str
    pol: Pol

    def __post_init__(self):
        object.__setattr__(self, "pol", Pol(self.pol))

    def __str__(self):
        return f"{self.pol.value}_{self.spatial}"

    def __repr__(self):
        return f"ModeLabel({self.spatial!r}, {self.pol.value!r})"

    @classmethod
    def parse(cls, text: str) -> "ModeLabel":
        """Parse ``"H_in"`` style labels."""
        pol, _, spatial = text.partition("_")
        if pol not in ("H", "V") or not spatial:
            raise ModeError(f"cannot parse mode label {text!r}")
        return cls(spatial, Pol(pol))


def mode(spatial: str, pol: str | Pol) -> ModeLabel:
    return ModeLabel(spatial, Pol(pol))


def pol_pair(spatial: str) -> tuple[ModeLabel, ModeLabel]:
    """The (H, V) modes of one spatial path."""
    return ModeLabel(spatial, Pol.H), ModeLabel(spatial, Pol.V)


def _expand_modes(modes: Iterable[ModeLabel | str]) -> set[ModeLabel]:
    out = set()
    for m in modes:
        if isinstance(m, ModeLabel):
            out.add(m)
        else:
            out.update(pol_pair(m))
    return out


class FockState:
    """Occupation-number basis state. Absent modes have occupation zero."""

    __slots__ = ("_occ", "_hash")

    def __init__(self, occupations: Mapping[ModeLabel, int] | Iterable[tuple[ModeLabel, int]] = ()):
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        acc: dict[ModeLabel, int] = {}
        for m, n in items:
            if not isinstance(m, ModeLabel):
                raise ModeError(f"not a mode label: {m!r}")
            n = int(n)
            if n < 0:
                raise ValueError(f"negative occupation {n} for {m}")
            if n:
                acc[m] = acc.get(m, 0) + n
        self._occ = tuple(sorted(acc.items()))
        self._hash = hash(self._occ)

    @classmethod
    def of(cls, *labels: ModeLabel | str) -> "FockState":
        """Basis state with one photon per listed label (repeats add up).

        >>> FockState.of("H_in", "H_a1", "H_a1")
        |H_in, 2H_a1>
        """
        c = Counter(m if isinstance(m, ModeLabel) else ModeLabel.parse(m) for m in labels)
        return cls(c)

    @property
    def key(self):
        return self._occ

    @property
    def total(self) -> int:
        return sum(n for _, n in self._occ)

    @property
    def modes(self) -> frozenset[ModeLabel]:
        return frozenset(m for m, _ in self._occ)

    def items(self):
        return self._occ

    def as_dict(self) -> dict[ModeLabel, int]:
        return dict(self._occ)

    def __getitem__(self, m: ModeLabel) -> int:
        for k, n in self._occ:
            if k == m:
                return n
        return 0

    def without(self, modes: Iterable[ModeLabel]) -> "FockState":
        drop = set(modes)
        return FockState((m, n) for m, n in self._occ if m not in drop)

    def restrict(self, modes: Iterable[ModeLabel]) -> "FockState":
        keep = set(modes)
        return FockState((m, n) for m, n in self._occ if m in keep)

    def merge(self, other: "FockState") -> "FockState":
        return FockState(list(self._occ) + list(other._occ))

    def norm_factor(self) -> float:
        """prod_m sqrt(n_m!): relates a†-monomials to normalized basis states."""
        return math.sqrt(math.prod(math.factorial(n) for _, n in self._occ))

    def __eq__(self, other):
        return isinstance(other, FockState) and self._occ == other._occ

    def __lt__(self, other):
        return self._occ < other._occ

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self._occ:
            return "|0>"
        parts = [(f"{n}" if n > 1 else "") + str(m) for m, n in self._occ]
        return "|" + ", ".join(parts) + ">"


VACUUM = FockState()


class StateVector:
    """Sparse superposition of Fock basis states.

    ``modes`` is the register: every mode the state is defined on, whether
    occupied or not. ``n_max`` bounds the total photon number of every term.
    """

    __slots__ = ("_terms", "_modes", "n_max")

    def __init__(self, terms: Mapping[FockState, complex] = None, modes: Iterable[ModeLabel | str] = (),
                 n_max: int = DEFAULT_N_MAX):
        terms = terms or {}
        kept = {}
        reg = _expand_modes(modes)
        for fs in sorted(terms):
            amp = complex(terms[fs])
            if abs(amp) < PRUNE_THRESHOLD:
                continue
            if fs.total > n_max:
                raise TruncationError(f"{fs!r} has {fs.total} photons > n_max={n_max}")
            kept[fs] = amp
            reg.update(fs.modes)
        self._terms = kept
        self._modes = frozenset(reg)
        self.n_max = n_max

    @property
    def terms(self) -> dict[FockState, complex]:
        return dict(self._terms)

    @property
    def modes(self) -> frozenset[ModeLabel]:
        return self._modes

    @property
    def spatial_modes(self) -> frozenset[str]:
        return frozenset(m.spatial for m in self._modes)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def amplitude(self, fs: FockState) -> complex:
        return self._terms.get(fs, 0j)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self._terms.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def is_zero(self) -> bool:
        return not self._terms

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return self._replace({k: a / nrm for k, a in self._terms.items()})

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        s = complex(sum(a.conjugate() * big._terms[k] for k, a in small._terms.items() if k in big._terms))
        return s if small is self else s.conjugate()

    def fidelity(self, other: "StateVector") -> float:
        """|<a|b>|^2 for the normalized versions of both states."""
        return abs(self.inner(other)) ** 2 / (self.norm_sq() * other.norm_sq())

    def with_modes(self, modes: Iterable[ModeLabel | str]) -> "StateVector":
        return StateVector(self._terms, self._modes | _expand_modes(modes), self.n_max)

    def with_n_max(self, n_max: int) -> "StateVector":
        return StateVector(self._terms, self._modes, n_max)

    def tensor(self, other: "StateVector") -> "StateVector":
        overlap = self._modes & other._modes
        if overlap:
            raise ModeError(f"registers overlap on {sorted(overlap)}")
        terms = defaultdict(complex)
        for k1, a1 in self._terms.items():
            for k2, a2 in other._terms.items():
                terms[k1.merge(k2)] += a1 * a2
        return StateVector(terms, self._modes | other._modes, max(self.n_max, other.n_max))

    def _replace(self, terms) -> "StateVector":
        return StateVector(terms, self._modes, self.n_max)

    def __add__(self, other: "StateVector") -> "StateVector":
        terms = defaultdict(complex, self._terms)
        for k, a in other._terms.items():
            terms[k] += a
        return StateVector(terms, self._modes | other._modes, max(self.n_max, other.n_max))

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, c):
        return self._replace({k: a * c for k, a in self._terms.items()})

    __rmul__ = __mul__

    def __repr__(self):
        if not self._terms:
            return "StateVector(0)"
        body = " + ".join(f"({a:.6g}){k!r}" for k, a in self._terms.items())
        return f"StateVector({body})"


def superpose(terms: Iterable[tuple[FockState, complex]], modes: Iterable[ModeLabel | str] = (),
              n_max: int = DEFAULT_N_MAX) -> StateVector:
    """Unnormalized superposition; duplicate basis states have their amplitudes added."""
    acc = defaultdict(complex)
    for fs, amp in terms:
        if fs.total > n_max:
            raise TruncationError(f"{fs!r} has {fs.total} photons > n_max={n_max}")
        acc[fs] += amp
    return StateVector(acc, modes, n_max)


ModeImage = Sequence[tuple[ModeLabel, complex]]


def apply_linear_map(state: StateVector, mapping: Mapping[ModeLabel, ModeImage]) -> StateVector:
    """Rewrite creation operators ``a†_m -> sum_k c_k a†_{m_k}`` for every mapped mode.

    Modes absent from ``mapping`` are left untouched. The map is applied to the
    normalized monomials ``prod (a†_m)^n / sqrt(n!)``, so the bosonic
    multinomial factors come out of the polynomial expansion automatically.
    """
    mapping = {m: tuple((t, complex(c)) for t, c in img) for m, img in mapping.items()}
    cache: dict[tuple, dict[tuple, complex]] = {}
    out = defaultdict(complex)
    for fs, amp in state.items():
        mapped = tuple((m, n) for m, n in fs.items() if m in mapping)
        rest = [(m, n) for m, n in fs.items() if m not in mapping]
        poly = cache.get(mapped)
        if poly is None:
            poly = _expand(mapped, mapping)
            cache[mapped] = poly
        pref = amp / fs.norm_factor()
        for mono, c in poly.items():
            new = FockState(rest + list(Counter(mono).items()))
            out[new] += pref * c * new.norm_factor()
    reg = (state.modes - set(mapping)) | {t for img in mapping.values() for t, _ in img}
    return StateVector(out, reg, state.n_max)


def _expand(mapped, mapping) -> dict[tuple, complex]:
    poly = {(): 1 + 0j}
    for m, n in mapped:
        img = mapping[m]
        for _ in range(n):
            nxt = defaultdict(complex)
            for mono, c in poly.items():
                for t, u in img:
                    if u != 0:
                        nxt[tuple(sorted(mono + (t,)))] += c * u
            poly = nxt
    return poly


def check_unitary(U, tol: float = 1e-12) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise UnitaryError(f"expected a square matrix, got shape {U.shape}")
    if not np.allclose(U @ U.conj().T, np.eye(U.shape[0]), rtol=0, atol=tol):
        raise UnitaryError("matrix is not unitary within tolerance")
    return U


def apply_two_mode_unitary(state: StateVector, m1: ModeLabel, m2: ModeLabel, U) -> StateVector:
    """Mix two modes: ``a†_{m_i} -> sum_j U[i, j] a†_{m_j}``."""
    U = check_unitary(U)
    if U.shape != (2, 2):
        raise UnitaryError("two-mode unitary must be 2x2")
    return apply_linear_map(state, {
        m1: [(m1, U[0, 0]), (m2, U[0, 1])],
        m2: [(m1, U[1, 0]), (m2, U[1, 1])],
    })


def project(state: StateVector, pattern: Mapping[ModeLabel, int]) -> tuple[StateVector, float]:
    """Post-select the given occupations and strip the projected modes.

    Returns the unnormalized remainder and its squared norm. Call
    ``remainder.normalized()`` for the conditional state.
    """
    pmodes = set(pattern)
    kept = {}
    for fs, amp in state.items():
        if all(fs[m] == n for m, n in pattern.items()):
            kept[fs.without(pmodes)] = amp
    rem = StateVector(kept, state.modes - pmodes, state.n_max)
    return rem, rem.norm_sq()


def occupation_patterns(state: StateVector, modes: Sequence[ModeLabel]) -> list[tuple[int, ...]]:
    """Distinct occupation tuples of ``modes`` that occur in ``state``, sorted."""
    return sorted({tuple(fs[m] for m in modes) for fs in state})


def split_by_pattern(state: StateVector, modes: Sequence[ModeLabel]) -> dict[tuple[int, ...], StateVector]:
    """Group terms by the occupations of ``modes``; each group has those modes stripped.

    Equivalent to calling :func:`project` for every pattern, in one pass.
    """
    groups: dict[tuple, dict] = defaultdict(dict)
    drop = set(modes)
    for fs, amp in state.items():
        groups[tuple(fs[m] for m in modes)][fs.without(drop)] = amp
    reg = state.modes - drop
    return {k: StateVector(v, reg, state.n_max) for k, v in sorted(groups.items())}


class DensityMatrix:
    """Operator on the span of an explicit list of Fock basis states."""

    __slots__ = ("basis", "matrix", "modes", "_index")

    def __init__(self, basis: Sequence[FockState], matrix, modes: Iterable[ModeLabel | str] = ()):
        self.basis = tuple(basis)
        mat = np.array(matrix, dtype=complex)
        if mat.shape != (len(self.basis), len(self.basis)):
            raise ValueError(f"matrix shape {mat.shape} does not match basis size {len(self.basis)}")
        mat.setflags(write=False)
        self.matrix = mat
        reg = _expand_modes(modes)
        for fs in self.basis:
            reg.update(fs.modes)
        self.modes = frozenset(reg)
        self._index = {fs: i for i, fs in enumerate(self.basis)}

    @classmethod
    def from_states(cls, states: Iterable[StateVector], weights: Iterable[float] = None) -> "DensityMatrix":
        """sum_k w_k |psi_k><psi_k| without normalization."""
        states = list(states)
        weights = [1.0] * len(states) if weights is None else list(weights)
        basis = sorted({fs for s in states for fs in s})
        idx = {fs: i for i, fs in enumerate(basis)}
        mat = np.zeros((len(basis), len(basis)), dtype=complex)
        reg = set()
        for s, w in zip(states, weights):
            reg |= s.modes
            if s.is_zero() or w == 0:
                continue
            v = np.zeros(len(basis), dtype=complex)
            for fs, a in s.items():
                v[idx[fs]] = a
            mat += w * np.outer(v, v.conj())
        return cls(basis, mat, reg)

    def index(self, fs: FockState) -> int:
        return self._index[fs]

    def element(self, bra: FockState, ket: FockState) -> complex:
        i, j = self._index.get(bra), self._index.get(ket)
        if i is None or j is None:
            return 0j
        return complex(self.matrix[i, j])

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityMatrix":
        tr = self.trace()
        if tr == 0:
            raise ZeroDivisionError("zero-trace operator")
        return DensityMatrix(self.basis, self.matrix / tr, self.modes)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=tol))

    def is_psd(self, tol: float = 1e-10) -> bool:
        return len(self.basis) == 0 or bool(self.eigenvalues().min() >= -tol)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def expectation(self, state: StateVector) -> complex:
        """<psi|rho|psi> for an unnormalized ``state``."""
        v = np.array([state.amplitude(fs) for fs in self.basis])
        return complex(v.conj() @ self.matrix @ v)

    def fidelity(self, state: StateVector) -> float:
        """<psi|rho|psi> / (Tr rho <psi|psi>)."""
        return float(self.expectation(state).real / (self.trace() * state.norm_sq()))

    def diagonal(self) -> dict[FockState, float]:
        return {fs: float(self.matrix[i, i].real) for i, fs in enumerate(self.basis)}

    def to_array(self, basis: Sequence[FockState]) -> np.ndarray:
        """Matrix in a caller-chosen basis; states missing from ``self.basis`` get zeros."""
        idx = [self._index.get(fs) for fs in basis]
        out = np.zeros((len(basis), len(basis)), dtype=complex)
        for a, i in enumerate(idx):
            if i is None:
                continue
            for b, j in enumerate(idx):
                if j is not None:
                    out[a, b] = self.matrix[i, j]
        return out

    def map_states(self, fn) -> "DensityMatrix":
        """Apply a linear map on kets, ``rho -> M rho M†``, with M given by ``fn`` on basis states."""
        images = [fn(StateVector({fs: 1.0}, self.modes, n_max=max(fs.total, DEFAULT_N_MAX))) for fs in self.basis]
        reg = set()
        for im in images:
            reg |= im.modes
        new_basis = sorted({fs for im in images for fs in im})
        idx = {fs: i for i, fs in enumerate(new_basis)}
        M = np.zeros((len(new_basis), len(self.basis)), dtype=complex)
        for j, im in enumerate(images):
            for fs, a in im.items():
                M[idx[fs], j] = a
        return DensityMatrix(new_basis, M @ self.matrix @ M.conj().T, reg)

    def partial_trace(self, modes: Iterable[ModeLabel | str]) -> "DensityMatrix":
        return partial_trace(self, modes)

    def partial_transpose(self, modes: Iterable[ModeLabel | str]) -> "DensityMatrix":
        """Transpose the tensor factor carried by ``modes``."""
        tmodes = _resolve(self, modes)
        split = [(fs.without(tmodes), fs.restrict(tmodes)) for fs in self.basis]
        rest = sorted({a for a, _ in split})
        part = sorted({b for _, b in split})
        new_basis = [a.merge(b) for a in rest for b in part]
        idx = {fs: i for i, fs in enumerate(new_basis)}
        out = np.zeros((len(new_basis), len(new_basis)), dtype=complex)
        for i, (a, b) in enumerate(split):
            for j, (a2, b2) in enumerate(split):
                if self.matrix[i, j] != 0:
                    out[idx[a.merge(b2)], idx[a2.merge(b)]] = self.matrix[i, j]
        return DensityMatrix(new_basis, out, self.modes)

    def __add__(self, other: "DensityMatrix") -> "DensityMatrix":
        basis = sorted(set(self.basis) | set(other.basis))
        return DensityMatrix(basis, self.to_array(basis) + other.to_array(basis), self.modes | other.modes)

    def __mul__(self, c: float) -> "DensityMatrix":
        return DensityMatrix(self.basis, self.matrix * c, self.modes)

    __rmul__ = __mul__

    def __repr__(self):
        return f"DensityMatrix(dim={len(self.basis)}, trace={self.trace():.6g})"


def _resolve(dm: DensityMatrix, modes: Iterable[ModeLabel | str]) -> set[ModeLabel]:
    out = set()
    for m in modes:
        if isinstance(m, ModeLabel):
            if m not in dm.modes:
                raise ModeError(f"mode {m} not in register")
            out.add(m)
        else:
            found = [x for x in pol_pair(m) if x in dm.modes]
            if not found:
                raise ModeError(f"spatial mode {m!r} not in register")
            out.update(found)
    return out


def to_density_matrix(state: StateVector) -> DensityMatrix:
    return DensityMatrix.from_states([state])


def partial_trace(dm: DensityMatrix, modes: Iterable[ModeLabel | str]) -> DensityMatrix:
    """Trace out ``modes`` (labels, or spatial names meaning both polarizations)."""
    tmodes = _resolve(dm, modes)
    kept = [fs.without(tmodes) for fs in dm.basis]
    traced = [fs.restrict(tmodes) for fs in dm.basis]
    new_basis = sorted(set(kept))
    pos = {fs: i for i, fs in enumerate(new_basis)}
    idx = np.array([pos[k] for k in kept], dtype=int)
    out = np.zeros((len(new_basis), len(new_basis)), dtype=complex)
    groups = defaultdict(list)
    for i, t in enumerate(traced):
        groups[t].append(i)
    for members in groups.values():
        members = np.array(members)
        rows = idx[members]
        out[np.ix_(rows, rows)] += dm.matrix[np.ix_(members, members)]
    return DensityMatrix(new_basis, out, dm.modes - tmodes)
