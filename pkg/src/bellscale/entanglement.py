"""n-tangle, violation thresholds, and the nonlocality-versus-tangle scan."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bellscale.bell_core import (
    build_bell_expression,
    canonical_settings,
    canonical_sign,
)
from bellscale.errors import BellError
from bellscale.quantum_engine import (
    StateVector,
    apply_pauli_string,
    expectation,
    make_gghz,
)

VIOLATION_EPS = 1e-12
_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class ScanRecord:
    alpha: float
    sin_2alpha: float
    tau: float | None
    bell_value: float
    two_sqrt_tau: float | None
    threshold_paper: float
    threshold_sg: float
    violation: bool


def n_tangle(state: StateVector) -> float:
    """Wong-Christensen n-tangle ``|<psi*| Y^{(x)n} |psi>|^2`` for even n.

    ``<psi*|`` is the transpose of ``|psi>`` (no conjugation), so the overlap is
    the bilinear form ``psi^T Y^{(x)n} psi``.
    """
    if state.n % 2:
        raise BellError(f"n-tangle is defined for even n only, got n={state.n}")
    if not state.is_normalized():
        raise BellError("n-tangle needs a normalized state")
    amps = state.amplitudes
    overlap = complex(np.sum(amps * apply_pauli_string("Y" * state.n, amps)))
    tau = abs(overlap) ** 2
    if tau > 1.0 + _CLAMP_TOL or tau < -_CLAMP_TOL:
        raise BellError(f"tangle {tau!r} outside [0, 1]")
    return min(max(tau, 0.0), 1.0)


def slice_tangle(alpha: float, beta: float, gamma: float, delta: float) -> float:
    """Closed form of the four-tangle of a slice state."""
    return (
        math.sin(2 * alpha) ** 2
        * math.sin(beta) ** 2
        * math.sin(gamma) ** 2
        * math.sin(delta) ** 2
    )


def nonlocality_tangle_relation(state: StateVector) -> tuple[float, float, float]:
    """Return ``(bell_value, 2*sqrt(tau), bell_value - 2*sqrt(tau))`` for a 4-qubit state.

    The Bell value uses the n=4 expression with sign -1 and x/y settings on
    every site.
    """
    if state.n != 4:
        raise BellError(f"relation is stated for n=4, got n={state.n}")
    bell = expectation(build_bell_expression(4, -1), canonical_settings(4), state)
    two_sqrt_tau = 2.0 * math.sqrt(n_tangle(state))
    return bell, two_sqrt_tau, bell - two_sqrt_tau


def violation_threshold(n: int) -> tuple[float, float]:
    """Minimal ``sin(2 alpha)`` for a GGHZ_n violation: (this construction, Scarani-Gisin)."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise BellError(f"n must be an integer >= 2, got {n!r}")
    own = 1.0 / math.sqrt(2.0) if n % 4 == 2 else 0.5
    return own, 1.0 / math.sqrt(2.0 ** (n - 1))


def scan_alpha(n: int, grid: Sequence[float]) -> list[ScanRecord]:
    """Bell value (and for n=4 the tangle) of GGHZ_n along a grid of angles."""
    if len(grid) == 0:
        raise BellError("alpha grid is empty")
    expr = build_bell_expression(n, canonical_sign(n))
    settings = canonical_settings(n)
    own, sg = violation_threshold(n)
    records = []
    for alpha in sorted(float(a) for a in grid):
        state = make_gghz(n, alpha)
        bell = expectation(expr, settings, state)
        tau = n_tangle(state) if n == 4 else None
        records.append(
            ScanRecord(
                alpha=alpha,
                sin_2alpha=math.sin(2 * alpha),
                tau=tau,
                bell_value=bell,
                two_sqrt_tau=2.0 * math.sqrt(tau) if tau is not None else None,
                threshold_paper=own,
                threshold_sg=sg,
                violation=bell > 1.0 + VIOLATION_EPS,
            )
        )
    return records
