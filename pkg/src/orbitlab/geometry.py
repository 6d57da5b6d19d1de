"""Index geometry: region classification, lay-off weights, lattice coordinates.

Every index j of a truncation [0, xi_{N+1}] belongs to exactly one region:

    Seed          j <= xi_1, the basis is left untouched (f_j = e_j)
    BWorking      [r(b+1), r*b + xi] for r = 1..xi, difference vectors
    BLayOff       the gaps between b-working intervals
    CWorking      [L, L + nu] for lattice points L = sum r_i c_i, r != 0
    CLayOff       the gaps between c-working intervals (first one included)
    TailLayOff    from the fan end to xi_{n+1}

On a lay-off interval written as [r+1, r+s] the weight of index j is
2^((s/2 + r + 1 - j)/sqrt(s)); b-side lay-offs use sqrt(b) and b/2 in place
of the actual interval length, which keeps the iterated-power ratios of the
shade estimate independent of the gap position.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Union

from .errors import ScheduleError, TruncationError
from .schedule import RATIONAL, StageSchedule

MAX_LATTICE_POINTS = 1_000_000


# -- region tags --------------------------------------------------------------

@dataclass(frozen=True)
class Seed:
    pass


@dataclass(frozen=True)
class BLayOff:
    n: int
    r: int  # number of b-working intervals strictly below (0 = leading gap)


@dataclass(frozen=True)
class BWorking:
    n: int
    r: int  # covers [r(b+1), r*b + xi]


@dataclass(frozen=True)
class CLayOff:
    n: int
    ordinal: int  # 0 = [nu+1, c_1-1], then gaps between lattice blocks in order


@dataclass(frozen=True)
class LatticeCoord:
    n: int
    r: tuple[int, ...]
    alpha: int

    @property
    def t(self) -> int:
        """Largest direction (1-based) with a nonzero coordinate."""
        for i in range(len(self.r) - 1, -1, -1):
            if self.r[i]:
                return i + 1
        raise ValueError("lattice coordinate must not be all zero")

    @property
    def abs_r(self) -> int:
        return sum(self.r)


@dataclass(frozen=True)
class CWorking:
    n: int
    coord: LatticeCoord


@dataclass(frozen=True)
class TailLayOff:
    n: int


RegionTag = Union[Seed, BLayOff, BWorking, CLayOff, CWorking, TailLayOff]


# -- per-stage interval table --------------------------------------------------

@dataclass(frozen=True)
class _Interval:
    lo: int
    hi: int
    tag: RegionTag


@lru_cache(maxsize=64)
def stage_table(schedule: StageSchedule, n: int) -> tuple[_Interval, ...]:
    """All intervals of stage n in increasing order, tiling (xi_n, xi_{n+1}]."""
    st = schedule.stage(n)
    xi, b, nu = st.xi, st.b, st.nu
    out: list[_Interval] = []
    pos = xi + 1
    for r in range(1, xi + 1):
        lo, hi = r * (b + 1), r * b + xi
        if lo > pos:
            out.append(_Interval(pos, lo - 1, BLayOff(n, r - 1)))
        if lo > hi:
            raise ScheduleError([f"empty b-working interval at stage {n}, r={r}"])
        out.append(_Interval(lo, hi, BWorking(n, r)))
        pos = hi + 1
    if pos != nu + 1:
        raise ScheduleError([f"b-fan does not end at nu at stage {n}"])

    n_points = (st.h + 1) ** st.k
    if n_points > MAX_LATTICE_POINTS:
        raise ScheduleError(
            [f"lattice of stage {n} has {n_points} points (cap {MAX_LATTICE_POINTS})"]
        )
    lattice = sorted(
        (sum(ri * ci for ri, ci in zip(r, st.c)), r)
        for r in product(range(st.h + 1), repeat=st.k)
        if any(r)
    )
    ordinal = 0
    for L, r in lattice:
        if L > pos:
            out.append(_Interval(pos, L - 1, CLayOff(n, ordinal)))
            ordinal += 1
        elif L < pos:
            raise ScheduleError([f"overlapping c-working intervals at stage {n}"])
        out.append(_Interval(L, L + nu, CWorking(n, LatticeCoord(n, r, 0))))
        pos = L + nu + 1
    xi_next = schedule.xi(n + 1)
    if pos <= xi_next:
        out.append(_Interval(pos, xi_next, TailLayOff(n)))
    elif pos != xi_next + 1:
        raise ScheduleError([f"fan of stage {n} overruns xi_{n + 1}"])
    return tuple(out)


@lru_cache(maxsize=64)
def _stage_starts(schedule: StageSchedule, n: int) -> tuple[int, ...]:
    return tuple(iv.lo for iv in stage_table(schedule, n))


def classify(j: int, schedule: StageSchedule) -> RegionTag:
    """The unique region containing index j; CWorking carries the full coordinate."""
    if j < 0 or j > schedule.xi_end:
        raise TruncationError(f"index {j} outside truncation [0, {schedule.xi_end}]")
    if j <= schedule.xi(1):
        return Seed()
    # stage n owns (xi_n, xi_{n+1}]
    lo, hi = 1, schedule.n_stages
    while lo < hi:
        mid = (lo + hi) // 2
        if j <= schedule.xi(mid + 1):
            hi = mid
        else:
            lo = mid + 1
    n = lo
    table = stage_table(schedule, n)
    i = bisect.bisect_right(_stage_starts(schedule, n), j) - 1
    iv = table[i]
    assert iv.lo <= j <= iv.hi
    tag = iv.tag
    if isinstance(tag, CWorking):
        return CWorking(n, LatticeCoord(n, tag.coord.r, j - iv.lo))
    return tag


def is_layoff(tag: RegionTag) -> bool:
    return isinstance(tag, (BLayOff, CLayOff, TailLayOff))


def region_interval(tag: RegionTag, schedule: StageSchedule) -> tuple[int, int]:
    """[lo, hi] covered by the region (CWorking: its whole working interval)."""
    if isinstance(tag, Seed):
        return 0, schedule.xi(1)
    for iv in stage_table(schedule, tag.n):
        t = iv.tag
        if isinstance(tag, CWorking) and isinstance(t, CWorking):
            if t.coord.r == tag.coord.r:
                return iv.lo, iv.hi
        elif t == tag:
            return iv.lo, iv.hi
    raise ValueError(f"region {tag} not found")


# -- lay-off weights -----------------------------------------------------------

def layoff_exponent(j: int, tag: RegionTag, schedule: StageSchedule) -> float:
    """Exponent e with weight(j) = 2^e."""
    st = schedule.stage(tag.n)
    if isinstance(tag, BLayOff):
        # [r*b + xi + 1, (r+1)(b+1) - 1], denominator sqrt(b) by convention
        return (0.5 * st.b + tag.r * st.b + st.xi + 1 - j) / math.sqrt(st.b)
    lo, hi = region_interval(tag, schedule)
    s = hi - lo + 1
    return (0.5 * s + lo - j) / math.sqrt(s)


def dyadic(x: float, bits: int = 40) -> Fraction:
    """Nearest fraction m / 2^e with a `bits`-bit mantissa (40 significant bits)."""
    if x == 0:
        return Fraction(0)
    m, e = math.frexp(x)  # x = m * 2^e, 0.5 <= |m| < 1
    mant = round(m * (1 << bits))
    return Fraction(mant, 1) * Fraction(2) ** (e - bits)


def pow2_dyadic(e: float, bits: int = 40) -> Fraction:
    """2^e as an exact dyadic with `bits` significant bits, any exponent size."""
    ip = math.floor(e)
    frac = e - ip
    return dyadic(2.0 ** frac, bits) * Fraction(2) ** ip


def layoff_weight(j: int, schedule: StageSchedule, tag: RegionTag | None = None):
    """Weight of a lay-off index, as float or 40-bit dyadic per weight mode."""
    if tag is None:
        tag = classify(j, schedule)
    if not is_layoff(tag):
        raise ValueError(f"index {j} is not in a lay-off region ({tag})")
    e = layoff_exponent(j, tag, schedule)
    if schedule.weight_mode == RATIONAL:
        return pow2_dyadic(e)
    return 2.0 ** e


# -- lattice coordinate arithmetic ----------------------------------------------

def coord_to_index(coord: LatticeCoord, schedule: StageSchedule) -> int:
    st = schedule.stage(coord.n)
    if len(coord.r) != st.k:
        raise ValueError(f"coordinate has {len(coord.r)} entries, stage has k={st.k}")
    if not any(coord.r):
        raise ValueError("lattice coordinate must not be all zero")
    if any(ri < 0 or ri > st.h for ri in coord.r):
        raise ValueError(f"coordinates must lie in [0, {st.h}]")
    if not 0 <= coord.alpha <= st.nu:
        raise ValueError(f"offset {coord.alpha} outside [0, {st.nu}]")
    return sum(ri * ci for ri, ci in zip(coord.r, st.c)) + coord.alpha


def index_to_coord(j: int, schedule: StageSchedule) -> LatticeCoord:
    """Greedy decomposition (largest c first); the c-gap invariants make it exact."""
    tag = classify(j, schedule)
    if not isinstance(tag, CWorking):
        raise ValueError(f"index {j} is not in a c-working interval ({tag})")
    st = schedule.stage(tag.n)
    rest = j
    r = [0] * st.k
    for i in range(st.k - 1, -1, -1):
        r[i] = min(st.h, rest // st.c[i])
        rest -= r[i] * st.c[i]
    coord = LatticeCoord(tag.n, tuple(r), rest)
    assert coord == tag.coord, f"greedy decomposition mismatch at {j}"
    return coord
