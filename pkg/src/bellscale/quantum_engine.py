"""Matrix-free pure-state numerics for Bell operators.

Basis convention: amplitude index ``b`` holds site ``i`` (1-based) in bit
``n - i``, so site 1 is the most significant bit.  Reshaping the amplitude
vector to ``(2,) * n`` therefore puts site ``i`` on axis ``i - 1``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from bellscale.bell_core import UNIT_TOL, BellExpression, MeasurementSettings
from bellscale.errors import BellError, ConvergenceError

STATE_CAP = 24
NORM_TOL = 1e-12
IMAG_TOL = 1e-10
DROP_TOL = 1e-14

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n,):
            raise BellError(f"expected {2**self.n} amplitudes for n={self.n}, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm**2 - 1.0) <= tol

    def inner(self, other: StateVector) -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _check_range(n: int, cap: int = STATE_CAP) -> None:
    if not isinstance(n, (int, np.integer)) or not 2 <= n <= cap:
        raise BellError(f"n must be an integer in [2, {cap}], got {n!r}")


def make_ghz(n: int) -> StateVector:
    _check_range(n)
    amps = np.zeros(2**n, dtype=complex)
    # cos(pi/4) and sin(pi/4) differ in the last bit; use one exact value
    amps[0] = amps[-1] = 1.0 / math.sqrt(2.0)
    return StateVector(n, amps)


def make_gghz(n: int, alpha: float) -> StateVector:
    """``cos(alpha)|0...0> + sin(alpha)|1...1>``."""
    _check_range(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = math.cos(alpha)
    amps[-1] = math.sin(alpha)
    return StateVector(n, amps)


def make_slice(alpha: float, beta: float, gamma: float, delta: float) -> StateVector:
    """Four-qubit slice state ``cos a|0000> + sin a|1>(c_b|0>+s_b|1>)(...)(...)``."""
    tail = np.array([1.0 + 0j])
    for angle in (beta, gamma, delta):
        tail = np.kron(tail, [math.cos(angle), math.sin(angle)])
    amps = np.zeros(16, dtype=complex)
    amps[0] = math.cos(alpha)
    amps[8:] += math.sin(alpha) * tail
    return StateVector(4, amps)


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings; ``labels`` are strings over ``IXYZ``, site 1 first."""

    n: int
    terms: tuple[tuple[complex, str], ...]

    def __post_init__(self) -> None:
        for _, labels in self.terms:
            if len(labels) != self.n or set(labels) - set("IXYZ"):
                raise BellError(f"bad Pauli string {labels!r} for n={self.n}")

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[complex, str]]) -> PauliSum:
        """Merge duplicate strings and drop negligible coefficients."""
        acc: dict[str, complex] = defaultdict(complex)
        for coeff, labels in terms:
            acc[labels] += coeff
        merged = tuple(
            (complex(c), s) for s, c in sorted(acc.items()) if abs(c) >= DROP_TOL
        )
        return cls(n, merged)

    def as_dict(self) -> dict[str, complex]:
        return {labels: coeff for coeff, labels in self.terms}

    def is_hermitian(self, tol: float = DROP_TOL) -> bool:
        # Pauli strings are Hermitian and linearly independent, so after
        # merging the sum is Hermitian iff every coefficient is real.
        merged = PauliSum.from_terms(self.n, self.terms)
        return all(abs(c.imag) <= tol for c, _ in merged.terms)

    def l1_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def to_dense(self) -> np.ndarray:
        """Dense matrix; intended for small-n cross-checks only."""
        mat = np.zeros((2**self.n, 2**self.n), dtype=complex)
        for coeff, labels in self.terms:
            op = np.array([[1.0 + 0j]])
            for ch in labels:
                op = np.kron(op, _PAULI[ch])
            mat += coeff * op
        return mat


def observable_from_bloch(v) -> PauliSum:
    """Single-site observable ``vx X + vy Y + vz Z``."""
    vec = np.asarray(v, dtype=float)
    if vec.shape != (3,):
        raise BellError(f"Bloch vector must have 3 components, got shape {vec.shape}")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > UNIT_TOL:
        raise BellError(f"Bloch vector {vec.tolist()} is not unit (norm {norm!r})")
    return PauliSum.from_terms(1, [(complex(c), p) for c, p in zip(vec, "XYZ")])


class _Indexer:
    """Per-n cached index and parity tables for Pauli-string application."""

    _cache: dict[int, _Indexer] = {}

    def __init__(self, n: int):
        self.idx = np.arange(2**n, dtype=np.int64)

    @classmethod
    def get(cls, n: int) -> _Indexer:
        if n not in cls._cache:
            cls._cache[n] = cls(n)
        return cls._cache[n]

    def parity(self, mask: int) -> np.ndarray:
        return (np.bitwise_count(self.idx & mask) & 1).astype(np.int64)


def _masks(labels: str) -> tuple[int, int, int]:
    n = len(labels)
    flip = phase = n_y = 0
    for site, ch in enumerate(labels):
        bit = 1 << (n - 1 - site)
        if ch in "XY":
            flip |= bit
        if ch in "YZ":
            phase |= bit
        n_y += ch == "Y"
    return flip, phase, n_y


def apply_pauli_string(labels: str, amplitudes: np.ndarray) -> np.ndarray:
    """Apply one Pauli string to a raw amplitude vector.

    ``Y|b> = i (-1)^b |1-b>`` and ``Z|b> = (-1)^b |b>``, so a string acts as a
    bit flip on its X/Y sites times ``i**(#Y)`` and a sign from the Y/Z bits.
    """
    flip, phase_mask, n_y = _masks(labels)
    ix = _Indexer.get(len(labels))
    signed = amplitudes * (1 - 2 * ix.parity(phase_mask)) if phase_mask else amplitudes
    out = signed[ix.idx ^ flip] if flip else signed.copy()
    return out * (1j**n_y)


def apply_pauli_sum(psum: PauliSum, state: StateVector) -> StateVector:
    if psum.n != state.n:
        raise BellError(f"operator has n={psum.n}, state has n={state.n}")
    # Strings sharing a flip mask differ only by a diagonal phase, so sum the
    # diagonals first and permute once per mask.
    ix = _Indexer.get(state.n)
    diagonals: dict[int, np.ndarray] = {}
    for coeff, labels in psum.terms:
        flip, phase_mask, n_y = _masks(labels)
        diag = (coeff * 1j**n_y) * (1 - 2 * ix.parity(phase_mask))
        if flip in diagonals:
            diagonals[flip] += diag
        else:
            diagonals[flip] = diag
    out = np.zeros_like(state.amplitudes)
    for flip, diag in diagonals.items():
        signed = diag * state.amplitudes
        out += signed[ix.idx ^ flip] if flip else signed
    return StateVector(state.n, out)


def pauli_expectation(psum: PauliSum, state: StateVector) -> complex:
    return state.inner(apply_pauli_sum(psum, state))


def _apply_site(op: np.ndarray, amps: np.ndarray, site: int, n: int) -> np.ndarray:
    """Apply a 2x2 operator to 0-based ``site`` of a flat amplitude vector."""
    left, right = 2**site, 2 ** (n - site - 1)
    # gather the site's 0/1 halves into a (2, M) block so the product is one matmul
    block = amps.reshape(left, 2, right).transpose(1, 0, 2).reshape(2, -1)
    return (op @ block).reshape(2, left, right).transpose(1, 0, 2).reshape(-1)


def _check_inputs(expr: BellExpression, settings: MeasurementSettings, state=None) -> None:
    if settings.n != expr.n:
        raise BellError(f"settings have n={settings.n}, expression has n={expr.n}")
    if state is not None and state.n != expr.n:
        raise BellError(f"state has n={state.n}, expression has n={expr.n}")


def correlators(
    expr: BellExpression, settings: MeasurementSettings, state: StateVector
) -> np.ndarray:
    """Real correlators ``<psi| (x) A^i_{choice_i} |psi>`` for each term.

    Consecutive terms share the partially applied state for their common
    choice prefix; only one path of at most n intermediate states is kept.
    """
    _check_inputs(expr, settings, state)
    n = expr.n
    vecs = settings.as_array()
    ops = np.einsum("skc,cij->skij", vecs, np.stack([_PAULI[p] for p in "XYZ"]))
    psi = state.amplitudes

    path: list[np.ndarray] = [psi]
    prev: tuple[int, ...] = ()

    values = np.empty(len(expr.terms))
    for k, term in enumerate(expr.terms):
        shared = 0
        while shared < len(prev) and prev[shared] == term.choice[shared]:
            shared += 1
        del path[shared + 1 :]
        for site in range(shared, n):
            path.append(_apply_site(ops[site, term.choice[site] - 1], path[-1], site, n))
        prev = term.choice
        c = complex(np.vdot(psi, path[-1]))
        if abs(c.imag) >= IMAG_TOL:
            raise BellError(f"correlator for {term.choice} has imaginary part {c.imag:.3e}")
        values[k] = c.real
    return values


def expectation(
    expr: BellExpression, settings: MeasurementSettings, state: StateVector
) -> float:
    """Quantum value ``<psi|B|psi>`` evaluated term by term."""
    corr = correlators(expr, settings, state)
    signs = np.array([t.coeff_sign for t in expr.terms], dtype=float)
    return float(signs @ corr) * expr.normalization


def bell_pauli_expansion(expr: BellExpression, settings: MeasurementSettings) -> PauliSum:
    _check_inputs(expr, settings)
    site_ops = [
        [observable_from_bloch(v).terms for v in pair] for pair in settings.vectors
    ]
    acc: dict[str, complex] = defaultdict(complex)
    for term in expr.terms:
        partial = [(complex(term.coeff_sign * expr.normalization), "")]
        for site, k in enumerate(term.choice):
            partial = [
                (c * c1, s + p) for c, s in partial for c1, p in site_ops[site][k - 1]
            ]
        for c, s in partial:
            acc[s] += c
    return PauliSum.from_terms(expr.n, ((c, s) for s, c in acc.items()))


def ghz_raising_operator(n: int) -> PauliSum:
    """``(prod (X + iY) + prod (X - iY)) / 2`` expanded into Pauli strings.

    A string with k Y factors gets ``(i**k + (-i)**k) / 2``, i.e. ``(-1)**(k/2)``
    for even k and 0 for odd k.
    """
    _check_range(n)
    terms = []
    for mask in range(2**n):
        k = bin(mask).count("1")
        if k % 2 == 0:
            labels = "".join("Y" if (mask >> (n - 1 - s)) & 1 else "X" for s in range(n))
            terms.append((complex((-1) ** (k // 2)), labels))
    return PauliSum.from_terms(n, terms)


def eigen_ratio(psum: PauliSum, state: StateVector) -> tuple[complex, float]:
    """Best proportionality constant of ``psum|psi>`` to ``|psi>`` and the residual norm."""
    image = apply_pauli_sum(psum, state).amplitudes
    lam = complex(np.vdot(state.amplitudes, image) / np.vdot(state.amplitudes, state.amplitudes))
    residual = float(np.linalg.norm(image - lam * state.amplitudes))
    return lam, residual


def ghz_stabilizer_check(
    n: int, state: StateVector | None = None, tol: float = 1e-10
) -> float:
    """Eigenvalue of the GHZ raising/lowering operator on ``state`` (GHZ_n by default).

    Raises ``BellError`` if the state is not an eigenvector.
    """
    psum = ghz_raising_operator(n)
    state = make_ghz(n) if state is None else state
    lam, residual = eigen_ratio(psum, state)
    if residual > tol or abs(lam.imag) > tol:
        raise BellError(
            f"state is not an eigenvector of the GHZ operator (residual {residual:.3e})"
        )
    return lam.real


def max_eigenvalue(
    psum: PauliSum,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> float:
    """Largest algebraic eigenvalue by shifted power iteration.

    Iterates on ``psum + c*I`` with ``c`` the L1 norm of the coefficients, which
    makes the spectrum nonnegative so the top eigenvalue dominates.
    """
    if not psum.is_hermitian():
        raise BellError("power iteration needs a Hermitian Pauli sum")
    if psum.n > STATE_CAP:
        raise BellError(f"n={psum.n} exceeds the state cap {STATE_CAP}")
    shift = psum.l1_norm()
    rng = np.random.default_rng(seed)
    v = random_state(psum.n, rng).amplitudes
    prev = None
    for _ in range(max_iter):
        w = apply_pauli_sum(psum, StateVector(psum.n, v)).amplitudes + shift * v
        rq = float(np.vdot(v, w).real)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return -shift
        v = w / nrm
        if prev is not None and abs(rq - prev) < tol:
            return rq - shift
        prev = rq
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


# name used by the CLI docs; the value returned is the largest algebraic eigenvalue
max_abs_eigenvalue = max_eigenvalue


def correlation_tensor(state: StateVector) -> np.ndarray:
    """Real tensor ``T[c1..cn] = <psi| s_c1 (x) ... (x) s_cn |psi>`` with ``c`` over X, Y, Z.

    Built once per state from the density tensor; memory is ``4**n`` complex
    numbers, so this is meant for n up to about 10.
    """
    n = state.n
    psi = state.amplitudes.reshape((2,) * n)
    # axes: kets of sites 1..n, then bras of sites 1..n
    t = np.multiply.outer(psi, psi.conj())
    paulis = np.stack([_PAULI[p] for p in "XYZ"])
    for remaining in range(n, 0, -1):
        # tr(rho s) = sum_ab rho[b, a] s[a, b]; the Pauli axis is appended last
        t = np.tensordot(t, paulis, axes=([0, remaining], [2, 1]))
    if np.max(np.abs(t.imag)) >= IMAG_TOL:
        raise BellError("correlation tensor has a non-negligible imaginary part")
    return np.ascontiguousarray(t.real)


def settings_correlators(tensor: np.ndarray, settings_array: np.ndarray) -> np.ndarray:
    """All ``2**n`` correlators for settings of shape (n, 2, 3), indexed by 0-based choices."""
    out = tensor
    for site in range(settings_array.shape[0]):
        # contract the leading Pauli axis, append the 2-valued choice axis
        out = np.tensordot(out, settings_array[site], axes=([0], [1]))
    return out
