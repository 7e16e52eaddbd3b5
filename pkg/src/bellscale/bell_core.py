"""Construction of the paired-CHSH-partition Bell expressions.

An n-site expression is a normalized sum of full-correlation terms.  Sites
are grouped into adjacent ascending pairs; each pair contributes either the
"minus" partition ``A1 B1 - A2 B2`` or the "plus" partition ``A1 B2 + A2 B1``.
The expression is

    norm * [ prod(minus partitions) + sign * prod(plus partitions) ]

and for odd n a leader site multiplies the first product by its observable 1
and the second product by its observable 2.  The normalization is always a
power of two, ``2 ** -(n // 2)``, so it is stored as an integer exponent.

Sites and observable selectors are 1-based throughout the public API, to
match the usual ``A^i_k`` notation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from bellscale.errors import BellError

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class CorrelationTerm:
    """One full-correlation monomial.

    ``choice[i]`` is 1 or 2 and selects observable ``A^{i+1}_1`` or
    ``A^{i+1}_2``.  The actual coefficient is ``coeff_sign`` times the
    normalization of the parent expression.
    """

    coeff_sign: int
    choice: tuple[int, ...]


@dataclass(frozen=True)
class BellExpression:
    n: int
    sign: int
    leader: int
    norm_exponent: int
    terms: tuple[CorrelationTerm, ...]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise BellError(f"n must be >= 2, got {self.n}")
        for term in self.terms:
            if len(term.choice) != self.n:
                raise BellError(
                    f"term {term.choice} has {len(term.choice)} sites, expected {self.n}"
                )
            if any(c not in (1, 2) for c in term.choice):
                raise BellError(f"choice entries must be 1 or 2: {term.choice}")
            if term.coeff_sign not in (1, -1):
                raise BellError(f"coeff_sign must be +1 or -1, got {term.coeff_sign}")

    @property
    def normalization(self) -> float:
        # exact in binary floating point
        return 2.0**-self.norm_exponent

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coeff_sign for t in self.terms], dtype=float) * self.normalization

    def pairs(self) -> list[tuple[int, int]]:
        """1-based site pairs used by the partition products."""
        return _pairs(self.n, self.leader)

    def family(self, term: CorrelationTerm) -> int:
        """0 for the minus-partition product, 1 for the plus-partition product."""
        if self.n % 2:
            return term.choice[self.leader - 1] - 1
        a, b = self.pairs()[0]
        return 0 if term.choice[a - 1] == term.choice[b - 1] else 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "sign": self.sign,
            "leader": self.leader,
            "normalization": f"2^-{self.norm_exponent}",
            "terms": [
                {"coeff_sign": t.coeff_sign, "choice": list(t.choice)} for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BellExpression:
        try:
            norm = str(data["normalization"])
            if not norm.startswith("2^-"):
                raise BellError(f"unsupported normalization {norm!r}; expected '2^-k'")
            terms = tuple(
                CorrelationTerm(int(t["coeff_sign"]), tuple(int(c) for c in t["choice"]))
                for t in data["terms"]
            )
            return cls(
                n=int(data["n"]),
                sign=int(data["sign"]),
                leader=int(data["leader"]),
                norm_exponent=int(norm[3:]),
                terms=terms,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, BellError):
                raise
            raise BellError(f"malformed expression JSON: {exc}") from exc


@dataclass(frozen=True)
class MeasurementSettings:
    """Two unit Bloch vectors per site; ``vectors[i][k]`` defines ``A^{i+1}_{k+1}``."""

    n: int
    vectors: tuple[tuple[tuple[float, float, float], tuple[float, float, float]], ...]

    def __post_init__(self) -> None:
        if len(self.vectors) != self.n:
            raise BellError(f"settings cover {len(self.vectors)} sites, expected {self.n}")
        for i, pair in enumerate(self.vectors, start=1):
            if len(pair) != 2:
                raise BellError(f"site {i} needs exactly two Bloch vectors")
            for vec in pair:
                if len(vec) != 3:
                    raise BellError(f"site {i}: Bloch vector must have 3 components")
                norm = math.sqrt(sum(x * x for x in vec))
                if abs(norm - 1.0) > UNIT_TOL:
                    raise BellError(f"site {i}: Bloch vector {vec} is not unit (norm {norm!r})")

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[Sequence[float]]]) -> MeasurementSettings:
        """Build from nested sequences (e.g. parsed JSON or a numpy array)."""
        try:
            vecs = tuple(
                tuple(tuple(float(x) for x in v) for v in pair) for pair in vectors
            )
        except TypeError as exc:
            raise BellError(f"malformed settings: {exc}") from exc
        return cls(len(vecs), vecs)

    def as_array(self) -> np.ndarray:
        """Array of shape (n, 2, 3)."""
        return np.array(self.vectors, dtype=float)

    def to_list(self) -> list[list[list[float]]]:
        return [[list(v) for v in pair] for pair in self.vectors]


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 2:
        raise BellError(f"n must be an integer >= 2, got {n!r}")


def _pairs(n: int, leader: int) -> list[tuple[int, int]]:
    sites = [i for i in range(1, n + 1) if not (n % 2 and i == leader)]
    return [(sites[k], sites[k + 1]) for k in range(0, len(sites), 2)]


def build_bell_expression(n: int, sign: int, leader: int = 1) -> BellExpression:
    """Expand the paired-partition expression into correlation terms.

    Terms are ordered lexicographically by their choice tuples within each
    family, minus-partition family first.
    """
    _check_n(n)
    if sign not in (1, -1):
        raise BellError(f"sign must be +1 or -1, got {sign!r}")
    if n % 2:
        if not 1 <= leader <= n:
            raise BellError(f"leader must lie in 1..{n}, got {leader}")
    else:
        leader = 1
    pairs = _pairs(n, leader)

    families: list[list[CorrelationTerm]] = [[], []]
    for picks in itertools.product((1, 2), repeat=len(pairs)):
        minus = [0] * n
        plus = [0] * n
        minus_sign = 1
        for (a, b), k in zip(pairs, picks):
            # A_k B_k, with a minus sign on A_2 B_2
            minus[a - 1] = minus[b - 1] = k
            if k == 2:
                minus_sign = -minus_sign
            # A_k B_{3-k}
            plus[a - 1] = k
            plus[b - 1] = 3 - k
        if n % 2:
            minus[leader - 1] = 1
            plus[leader - 1] = 2
        families[0].append(CorrelationTerm(minus_sign, tuple(minus)))
        families[1].append(CorrelationTerm(sign, tuple(plus)))

    terms = tuple(
        term for fam in families for term in sorted(fam, key=lambda t: t.choice)
    )
    return BellExpression(
        n=n, sign=sign, leader=leader, norm_exponent=len(pairs), terms=terms
    )


def term_count(n: int) -> int:
    _check_n(n)
    return 2 ** ((n + 1) // 2) if n % 2 else 2 ** (n // 2 + 1)


def canonical_sign(n: int) -> int:
    """Prefactor of the plus-partition product that makes GHZ reach its claimed value.

    This is ``(-1) ** ((n + 2) // 4)``.  The frequently quoted exponent
    ``(n - 1) // 4`` agrees with it only for n = 1 (mod 4).
    """
    _check_n(n)
    return -1 if ((n + 2) // 4) % 2 else 1


_X = (1.0, 0.0, 0.0)
_Y = (0.0, 1.0, 0.0)
_R = 1.0 / math.sqrt(2.0)


def canonical_settings(n: int) -> MeasurementSettings:
    """Hand-picked x-y plane settings under which GHZ_n violates maximally.

    * n = 2 (mod 4): site 1 measures (x+y)/sqrt2 and (-x+y)/sqrt2.
    * n = 3, 0 (mod 4): every site measures x and y.
    * n = 1 (mod 4): site 1 measures x twice.

    All other sites measure x and y.
    """
    _check_n(n)
    rest = ((_X, _Y),) * (n - 1)
    if n % 4 == 2:
        first = ((_R, _R, 0.0), (-_R, _R, 0.0))
    elif n % 4 == 1:
        first = (_X, _X)
    else:
        first = (_X, _Y)
    return MeasurementSettings(n, (first,) + rest)
