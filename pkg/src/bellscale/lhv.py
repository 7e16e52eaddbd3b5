"""Classical (local deterministic) analysis of Bell expressions.

A deterministic strategy assigns +1 or -1 to every observable.  It is
encoded as an integer in ``[0, 4**n)`` holding two bits per site, site 1 in
the most significant bit-pair.  Within a site's pair the high bit belongs to
observable 1 and the low bit to observable 2; bit 0 means +1.

Enumeration splits the sites into a prefix and a suffix block.  The value of
every strategy in a block of prefixes is then one small matrix product of
±1 tables, which is exact because all partial sums are small integers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from bellscale.bell_core import BellExpression, build_bell_expression
from bellscale.errors import BellError, StructureError

DEFAULT_CAP = 12
_PREFIX_BATCH = 256


@dataclass(frozen=True)
class DeterministicStrategy:
    """``assignment[i] = (value of A^{i+1}_1, value of A^{i+1}_2)``."""

    n: int
    assignment: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.assignment) != self.n:
            raise BellError(f"strategy covers {len(self.assignment)} sites, expected {self.n}")
        for pair in self.assignment:
            if len(pair) != 2 or any(v not in (1, -1) for v in pair):
                raise BellError(f"strategy values must be +1/-1 pairs, got {pair}")

    @classmethod
    def from_index(cls, n: int, index: int) -> DeterministicStrategy:
        if not 0 <= index < 4**n:
            raise BellError(f"strategy index {index} outside [0, 4^{n})")
        assignment = []
        for site in range(n):
            bits = (index >> (2 * (n - 1 - site))) & 3
            assignment.append((1 - 2 * (bits >> 1), 1 - 2 * (bits & 1)))
        return cls(n, tuple(assignment))

    @property
    def index(self) -> int:
        idx = 0
        for a1, a2 in self.assignment:
            idx = (idx << 2) | ((a1 < 0) << 1) | (a2 < 0)
        return idx


@dataclass(frozen=True)
class LHVResult:
    max_value: Fraction
    witness: DeterministicStrategy
    exhaustive: bool
    evaluated: int


def lhv_value(expr: BellExpression, strategy: DeterministicStrategy) -> Fraction:
    if strategy.n != expr.n:
        raise BellError(f"strategy has n={strategy.n}, expression has n={expr.n}")
    total = 0
    for term in expr.terms:
        prod = term.coeff_sign
        for site, k in enumerate(term.choice):
            prod *= strategy.assignment[site][k - 1]
        total += prod
    return Fraction(total, 2**expr.norm_exponent)


def partition_values(a1: int, a2: int, b1: int, b2: int) -> tuple[int, int]:
    """Return ``(a1*b1 - a2*b2, a1*b2 + a2*b1)`` for ±1 outcomes."""
    for v in (a1, a2, b1, b2):
        if v not in (1, -1):
            raise BellError(f"partition inputs must be +1 or -1, got {v!r}")
    return a1 * b1 - a2 * b2, a1 * b2 + a2 * b1


def _site_tables(expr: BellExpression, sites: range) -> np.ndarray:
    """±1 table of shape (4**len(sites), n_terms): each term's partial product.

    Row r encodes the strategies of ``sites`` in the same 2-bit layout as the
    full index.
    """
    m = len(sites)
    rows = np.arange(4**m, dtype=np.int64)
    choice = np.array([t.choice for t in expr.terms], dtype=np.int64)
    table = np.ones((rows.size, len(expr.terms)), dtype=np.int64)
    for pos, site in enumerate(sites):
        shift = 2 * (m - 1 - pos)
        # observable 1 sits in the high bit of the pair, observable 2 in the low bit
        bit1 = (rows >> (shift + 1)) & 1
        bit2 = (rows >> shift) & 1
        vals = np.stack([1 - 2 * bit1, 1 - 2 * bit2], axis=1)
        table *= vals[:, choice[:, site] - 1]
    return table


class _Enumerator:
    def __init__(self, expr: BellExpression):
        self.expr = expr
        n = expr.n
        self.suffix_sites = n - n // 2
        self.block = 4**self.suffix_sites
        signs = np.array([t.coeff_sign for t in expr.terms], dtype=np.float64)
        # float64 is exact here: entries are ±1 and row sums stay below 2**53
        self.prefix = (_site_tables(expr, range(0, n // 2)) * signs).astype(np.float64)
        self.suffix = _site_tables(expr, range(n // 2, n)).astype(np.float64).T

    def range_max(self, start: int, stop: int) -> tuple[int, int]:
        """(max |integer sum|, lowest index attaining it) over [start, stop)."""
        best, best_idx = -1, -1
        first_p = start // self.block
        last_p = (stop - 1) // self.block
        for p0 in range(first_p, last_p + 1, _PREFIX_BATCH):
            p1 = min(p0 + _PREFIX_BATCH, last_p + 1)
            vals = np.abs(self.prefix[p0:p1] @ self.suffix)
            lo = start - p0 * self.block
            hi = stop - p0 * self.block
            flat = vals.reshape(-1)
            if lo > 0 or hi < flat.size:
                flat = flat[max(lo, 0) : min(hi, flat.size)]
                offset = p0 * self.block + max(lo, 0)
            else:
                offset = p0 * self.block
            j = int(np.argmax(flat))
            v = int(round(flat[j]))
            if v > best:
                best, best_idx = v, offset + j
        return best, best_idx


def shard_ranges(total: int, shards: int) -> list[tuple[int, int]]:
    shards = max(1, min(shards, total))
    step, extra = divmod(total, shards)
    out, lo = [], 0
    for k in range(shards):
        hi = lo + step + (1 if k < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def lhv_max(
    expr: BellExpression,
    cap: int = DEFAULT_CAP,
    threads: int | None = None,
    ranges: list[tuple[int, int]] | None = None,
) -> LHVResult:
    """Exhaustive maximum of ``|<B>|`` over all ``4**n`` deterministic strategies.

    ``ranges`` overrides the default sharding; they must cover ``[0, 4**n)``
    for the result to be a certificate, which is the caller's responsibility.
    Ties go to the lowest strategy index.
    """
    if expr.n > cap:
        raise BellError(
            f"n={expr.n} exceeds the enumeration cap {cap}; "
            "raise --cap or use lhv_sample for a non-exhaustive lower bound"
        )
    total = 4**expr.n
    threads = threads or os.cpu_count() or 1
    if ranges is None:
        ranges = shard_ranges(total, threads * 4 if expr.n >= 8 else 1)
    enum = _Enumerator(expr)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda r: enum.range_max(*r), ranges))
    best, best_idx = -1, -1
    for v, idx in results:
        if v > best or (v == best and idx < best_idx):
            best, best_idx = v, idx
    return LHVResult(
        max_value=Fraction(best, 2**expr.norm_exponent),
        witness=DeterministicStrategy.from_index(expr.n, best_idx),
        exhaustive=True,
        evaluated=sum(hi - lo for lo, hi in ranges),
    )


def lhv_sample(expr: BellExpression, samples: int, seed: int = 0) -> LHVResult:
    """Uniform random strategies; the maximum found is only a lower bound."""
    if samples < 1:
        raise BellError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = expr.n
    choice = np.array([t.choice for t in expr.terms], dtype=np.int64) - 1
    signs = np.array([t.coeff_sign for t in expr.terms], dtype=np.int64)
    best, best_assign = -1, None
    for lo in range(0, samples, 4096):
        m = min(4096, samples - lo)
        values = rng.choice(np.array([1, -1], dtype=np.int64), size=(m, n, 2))
        prods = np.ones((m, len(signs)), dtype=np.int64)
        for site in range(n):
            prods *= values[:, site, choice[:, site]]
        sums = np.abs(prods @ signs)
        j = int(np.argmax(sums))
        if sums[j] > best:
            best, best_assign = int(sums[j]), values[j]
    witness = DeterministicStrategy(n, tuple((int(a), int(b)) for a, b in best_assign))
    return LHVResult(
        max_value=Fraction(best, 2**expr.norm_exponent),
        witness=witness,
        exhaustive=False,
        evaluated=samples,
    )


def algebraic_bound(expr: BellExpression) -> Fraction:
    """Classical bound from partition exclusivity; only for paired-partition expressions.

    For ±1 outcomes exactly one of the two partitions of each pair is ±2 and
    the other is 0, so at most one of the two products is nonzero and its
    magnitude is ``2 ** n_pairs``, which the normalization cancels.
    """
    try:
        reference = build_bell_expression(expr.n, expr.sign, expr.leader)
    except BellError as exc:
        raise StructureError(f"structure unknown: {exc}") from exc
    if reference != expr:
        raise StructureError(
            "structure unknown: expression is not a paired-partition Bell expression; "
            "only exhaustive enumeration applies"
        )
    return Fraction(2 ** len(expr.pairs()), 2**expr.norm_exponent)
