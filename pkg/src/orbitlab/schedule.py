"""Stage-parameter schedules: validation, truncation bookkeeping, config I/O.

A schedule fixes, for each stage n >= 1, the numbers that shape the basis
construction on the index block (xi_n, xi_{n+1}]:

    xi     last index owned by the previous stages
    b      offset of the difference vectors in the b-fan
    nu     end of the b-fan, always xi * (b + 1)
    c      base points of the c-fan lattice (k of them, increasing)
    h      maximal lattice coordinate (shade count per direction)
    k      number of lattice directions (= number of fan polynomials)
    d      degree cap for the fan polynomials
    gamma  scaling of the c-fan working vectors (None = calibrate at build)
    delta  per-stage tolerance used by the block estimates
    eps    per-stage tolerance used by the iterated-power estimates

All constraints that the construction needs (ordering, disjointness of the
working intervals, positivity) are encoded in :func:`validate`; violations
are returned as data, never raised.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import ConfigError

ScalarValue = Union[float, Fraction]

REAL = "real"
COMPLEX = "complex"
FLOAT = "float"
RATIONAL = "rational"


@dataclass(frozen=True)
class StageParams:
    xi: int
    b: int
    c: tuple[int, ...]
    h: int
    k: int
    d: int
    gamma: Optional[ScalarValue]
    delta: float
    eps: float
    nu_declared: Optional[int] = None  # validated against xi * (b + 1)

    @property
    def nu(self) -> int:
        if self.nu_declared is not None:
            return self.nu_declared
        return self.xi * (self.b + 1)

    @property
    def fan_end(self) -> int:
        """Last index of the c-fan: h * (c_1 + ... + c_k) + nu."""
        return self.h * sum(self.c) + self.nu


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple[StageParams, ...]
    xi_end: int
    scalar_field: str = REAL
    weight_mode: str = FLOAT

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def stage(self, n: int) -> StageParams:
        """Stage parameters for stage n (1-based)."""
        if not 1 <= n <= self.n_stages:
            raise IndexError(f"stage {n} out of range 1..{self.n_stages}")
        return self.stages[n - 1]

    def xi(self, n: int) -> int:
        """xi_n for n = 0 .. n_stages + 1 (xi_0 = 0)."""
        if n == 0:
            return 0
        if n <= self.n_stages:
            return self.stages[n - 1].xi
        if n == self.n_stages + 1:
            return self.xi_end
        raise IndexError(f"xi_{n} undefined for a {self.n_stages}-stage schedule")

    def with_gammas(self, gammas: Sequence[ScalarValue]) -> "StageSchedule":
        stages = tuple(
            replace(st, gamma=g) for st, g in zip(self.stages, gammas, strict=True)
        )
        return replace(self, stages=stages)


def validate(schedule: StageSchedule) -> list[str]:
    """Check every construction invariant; return one message per violation.

    Pure and idempotent: equal schedules yield equal violation lists.
    """
    v: list[str] = []
    if schedule.scalar_field not in (REAL, COMPLEX):
        v.append(f"unknown scalar field {schedule.scalar_field!r}")
    if schedule.weight_mode not in (FLOAT, RATIONAL):
        v.append(f"unknown weight mode {schedule.weight_mode!r}")

    prev_xi = 0
    prev_small = None  # (gamma, delta, eps) of the previous stage
    for n, st in enumerate(schedule.stages, start=1):
        if st.xi <= prev_xi:
            v.append(f"xi growth at stage {n}")
        if st.b <= 2 * st.xi + st.d:
            v.append(f"b lower bound at stage {n}")
        if st.nu_declared is not None and st.nu_declared != st.xi * (st.b + 1):
            v.append(f"nu-formula at stage {n}")
        if st.d < 0 or st.d > st.nu:
            v.append(f"degree bound at stage {n}")
        if st.k != len(st.c) or st.k < 1:
            v.append(f"fan size at stage {n}")
        if st.h < 1:
            v.append(f"shade count at stage {n}")
        if any(c2 <= c1 for c1, c2 in zip(st.c, st.c[1:])):
            v.append(f"c strictly increasing at stage {n}")
        if st.c and st.c[0] <= st.nu:
            v.append(f"c gap at stage {n} (1)")
        running = 0
        for i, ci in enumerate(st.c, start=1):
            if i > 1 and ci <= st.h * running + st.nu:
                v.append(f"c gap at stage {n} ({i})")
            running += ci
        xi_next = schedule.xi(n + 1)
        if xi_next <= st.fan_end:
            v.append(f"xi_next above fan end at stage {n}")
        for name, val in (("gamma", st.gamma), ("delta", st.delta), ("eps", st.eps)):
            if val is not None and not val > 0:
                v.append(f"{name} positive at stage {n}")
        if prev_small is not None:
            for name, val, prev in zip(
                ("gamma", "delta", "eps"),
                (st.gamma, st.delta, st.eps),
                prev_small,
                strict=True,
            ):
                if val is not None and prev is not None and not val < prev:
                    v.append(f"{name} strictly decreasing at stage {n}")
        prev_xi = st.xi
        prev_small = (st.gamma, st.delta, st.eps)
    return v


def truncation_length(schedule: StageSchedule, n_stages: int) -> int:
    """Largest index fully determined by stages <= n_stages (xi_{n_stages+1})."""
    if not 0 <= n_stages <= schedule.n_stages:
        raise IndexError(
            f"n_stages {n_stages} out of range 0..{schedule.n_stages}"
        )
    return schedule.xi(n_stages + 1)


# -- config file I/O ---------------------------------------------------------
#
# INI layout: one [schedule] section plus one [stage N] section per stage.
# Fan polynomials live next to their stage as `fan = a0 a1 ... | a0 a1 ...`.

def _format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return repr(x)


def _parse_scalar(tok: str, field: str) -> Union[float, Fraction, complex]:
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/")
        return Fraction(int(num), int(den))
    if field == COMPLEX and ("j" in tok or "J" in tok):
        return complex(tok)
    f = float(tok)
    return f


def _parse_poly_list(text: str, field: str):
    from .polynet import Poly

    polys = []
    for chunk in text.split("|"):
        coeffs = tuple(_parse_scalar(t, field) for t in chunk.split())
        polys.append(Poly(coeffs))
    return polys


def _format_poly_list(polys) -> str:
    return " | ".join(
        " ".join(_format_scalar(a) for a in (p.coeffs or (0,))) for p in polys
    )


def save_config(path, schedule: StageSchedule, families) -> None:
    cp = configparser.ConfigParser()
    cp["schedule"] = {
        "scalar_field": schedule.scalar_field,
        "weight_mode": schedule.weight_mode,
        "xi_end": str(schedule.xi_end),
        "n_stages": str(schedule.n_stages),
    }
    for n, (st, fam) in enumerate(zip(schedule.stages, families, strict=True), 1):
        cp[f"stage {n}"] = {
            "xi": str(st.xi),
            "b": str(st.b),
            "nu": str(st.nu),
            "c": " ".join(str(ci) for ci in st.c),
            "h": str(st.h),
            "k": str(st.k),
            "d": str(st.d),
            "gamma": "auto" if st.gamma is None else _format_scalar(st.gamma),
            "delta": repr(st.delta),
            "eps": repr(st.eps),
            "fan": _format_poly_list(fam),
        }
    with open(path, "w") as fh:
        cp.write(fh)


def load_config(path):
    """Read a schedule config; returns (schedule, families).

    Raises ConfigError carrying the validator's violation list when the file
    encodes an invalid schedule.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        sect = cp["schedule"]
        field = sect.get("scalar_field", REAL)
        mode = sect.get("weight_mode", FLOAT)
        xi_end = int(sect["xi_end"])
        n_stages = int(sect["n_stages"])
        stages = []
        families = []
        for n in range(1, n_stages + 1):
            s = cp[f"stage {n}"]
            gamma_tok = s.get("gamma", "auto").strip()
            gamma = None if gamma_tok == "auto" else _parse_scalar(gamma_tok, REAL)
            stages.append(
                StageParams(
                    xi=int(s["xi"]),
                    b=int(s["b"]),
                    nu_declared=int(s["nu"]) if "nu" in s else None,
                    c=tuple(int(t) for t in s["c"].split()),
                    h=int(s["h"]),
                    k=int(s["k"]),
                    d=int(s["d"]),
                    gamma=gamma,
                    delta=float(s["delta"]),
                    eps=float(s["eps"]),
                )
            )
            families.append(tuple(_parse_poly_list(s["fan"], field)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    schedule = StageSchedule(
        stages=tuple(stages), xi_end=xi_end, scalar_field=field, weight_mode=mode
    )
    violations = validate(schedule)
    if violations:
        raise ConfigError(
            f"invalid schedule in {path}: " + "; ".join(violations)
        )
    return schedule, tuple(families)
