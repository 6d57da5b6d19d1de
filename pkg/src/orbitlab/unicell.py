"""Triangular Toeplitz steering and orbit comparison.

Steering: for x with leading e-coordinate nonzero and any target y supported
no lower than x, forward substitution on the lower-triangular Toeplitz system
produces the unique polynomial p of degree <= xi - r with p(T_xi) x = y.

Comparison: the vector whose first sufficiently large head coordinate appears
earlier can be steered onto the other; the chosen direction plus a measured
certificate chain is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import PreconditionError, TruncationError
from .polynet import Poly, ZETA, b_damped, nearest_member
from .report import Entry, check
from .basis import shift_e, shift_exits, vec_add, vec_clean, vec_norm, poly_shift_apply

X_CONTAINS_Y = "x-contains-y"
Y_CONTAINS_X = "y-contains-x"


@dataclass(frozen=True)
class ToeplitzSystem:
    """p(T_xi) x = y restricted to coordinates [r, xi]; x[0] is the leading
    (nonzero) e_r coordinate of x."""

    xi: int
    r: int
    x: tuple
    y: tuple

    def __post_init__(self):
        m = self.xi - self.r + 1
        if len(self.x) != m or len(self.y) != m:
            raise ValueError(f"coordinate tuples must have length {m}")
        if self.x[0] == 0:
            raise ValueError("leading coefficient must be nonzero")


def solve_poly(sys: ToeplitzSystem) -> Poly:
    """Forward substitution; exact in exact arithmetic, degree <= xi - r."""
    m = sys.xi - sys.r + 1
    a = [0] * m
    for u in range(m):
        s = sys.y[u]
        for i in range(1, u + 1):
            if sys.x[i] != 0 and a[u - i] != 0:
                s = s - sys.x[i] * a[u - i]
        a[u] = s / sys.x[0]
    return Poly(tuple(a))


def steering_residual(sys: ToeplitzSystem, p: Poly) -> float:
    """l2 residual of p(T_xi) x = y on [r, xi] (plain coordinates)."""
    m = sys.xi - sys.r + 1
    out = [0] * m  # int zero keeps exact coefficients exact
    for u, coef in enumerate(p.coeffs):
        if coef == 0:
            continue
        for i in range(m - u):
            out[i + u] += coef * sys.x[i]
    return math.sqrt(sum(abs(o - yv) ** 2 for o, yv in zip(out, sys.y)))


# -- large head coordinates ---------------------------------------------------------

@dataclass(frozen=True)
class LargeCoordIndex:
    stage: int
    base: float               # the constant C of the threshold ladder
    j: int
    value: float              # |alpha_j|
    threshold: float          # C^-(xi - j + 1)
    side_condition_ok: bool   # sqrt(C) >= sup ||e_j|| on the head block
    sup_e: float


def large_coord_index(basis, x_f: dict, n: int, base: float = 4.0
                      ) -> Optional[LargeCoordIndex]:
    """Smallest j in [0, xi_n] whose e-coordinate of x / ||x|| clears the
    ladder C^-(xi-j+1); None when no coordinate qualifies."""
    from .operators import sup_e_norm

    st = basis.schedule.stage(n)
    nx = vec_norm(x_f)
    if nx == 0:
        return None
    alpha = basis.f_to_e(basis.project_f(x_f, 0, st.xi))
    sup_e = sup_e_norm(basis, st.xi)
    side_ok = math.sqrt(base) >= sup_e
    for j in range(st.xi + 1):
        thr = base ** -(st.xi - j + 1)
        val = abs(alpha.get(j, 0)) / nx
        if val >= thr:
            return LargeCoordIndex(n, base, j, float(val), thr, side_ok, sup_e)
    return None


# -- orbit comparison ----------------------------------------------------------------

@dataclass
class ComparisonResult:
    direction: str
    j_lead: int
    j_follow: Optional[int]
    poly: Poly
    damped_ell1: float
    k: int
    power: int
    steps: tuple
    final_residual: float
    composed_bound: float
    details: dict = field(default_factory=dict)


def compare_orbits(basis, x_f: dict, y_f: dict, n: int, base: float = 4.0
                   ) -> ComparisonResult:
    """Decide which orbit closure contains the other at this truncation scale
    and certify the steering chain; ties keep the first argument in front."""
    from .hypercyclic import PipelineStep, _poly_sub, _power_norms, \
        fan_residual, fan_residual_bound

    nx, ny = vec_norm(x_f), vec_norm(y_f)
    if nx == 0 or ny == 0:
        raise PreconditionError("orbit comparison needs nonzero vectors")
    x_f = {j: v / nx for j, v in x_f.items()}
    y_f = {j: v / ny for j, v in y_f.items()}
    jx = large_coord_index(basis, x_f, n, base)
    jy = large_coord_index(basis, y_f, n, base)
    if jx is None and jy is None:
        raise PreconditionError(
            "neither vector has a large head coordinate at this stage")
    if jy is None or (jx is not None and jx.j <= jy.j):
        direction, lead, follow, j_lead = X_CONTAINS_Y, x_f, y_f, jx
        j_follow = None if jy is None else jy.j
    else:
        direction, lead, follow, j_lead = Y_CONTAINS_X, y_f, x_f, jy
        j_follow = jx.j if jx is not None else None

    st = basis.schedule.stage(n)
    xi = st.xi
    head_u = basis.project_f(lead, 0, xi)
    head_v = basis.project_f(follow, 0, xi)
    au = basis.f_to_e(head_u)
    av = basis.f_to_e(head_v)
    js = j_lead.j
    xs = tuple(au.get(j, 0) for j in range(js, xi + 1))
    ys = tuple(av.get(j, 0) for j in range(js, xi + 1))
    p = solve_poly(ToeplitzSystem(xi, js, xs, ys))

    # steering error on the full heads (small-coordinate tails of both sides)
    t1_vec = _apply_tshift(p, au, xi)
    vec_add(t1_vec, av, -1)
    t1 = vec_norm(basis.e_to_f(vec_clean(t1_vec)))

    p_shift = ZETA * p
    target = shift_e(av, 1, basis.n_trunc)
    t2_vec = poly_shift_apply(p_shift, au, basis.n_trunc)
    vec_add(t2_vec, target, -1)
    t2 = vec_norm(basis.e_to_f(vec_clean(t2_vec)))

    q = b_damped(p_shift, st.b, degree_cap=st.nu)
    t3_vec = poly_shift_apply(q, au, basis.n_trunc)
    vec_add(t3_vec, target, -1)
    t3 = vec_norm(basis.e_to_f(vec_clean(t3_vec)))

    family = basis.families[n - 1][: st.k]
    k0, snap_dist = nearest_member(family, q)
    pk = family[k0]
    ck = st.c[k0]

    body = basis.project_f(lead, 0, st.nu)
    body_e = basis.f_to_e(body)
    mid = basis.project_f(lead, xi + 1, st.nu)
    m_mid = vec_norm(basis.e_to_f(
        poly_shift_apply(q, basis.f_to_e(mid), basis.n_trunc)))
    dq = _poly_sub(q, pk)
    m_snap = vec_norm(basis.e_to_f(poly_shift_apply(dq, body_e, basis.n_trunc)))
    pw = _power_norms(basis, body_e,
                      [u for u, a in enumerate(dq.coeffs) if a != 0])
    snap_bound = float(sum(abs(a) * pw[u]
                           for u, a in enumerate(dq.coeffs) if a != 0))
    m_fan = fan_residual(basis, body, n, k0 + 1)
    fan_bound = fan_residual_bound(basis, n) * vec_norm(body)
    tail = {j: v for j, v in lead.items() if j > st.nu}
    if tail:
        te = basis.f_to_e(tail)
        if shift_exits(te, ck, basis.n_trunc):
            raise TruncationError("tail would leave the truncation")
        m_tail = vec_norm(basis.e_to_f(shift_e(te, ck, basis.n_trunc)))
    else:
        m_tail = 0.0

    lead_e = basis.f_to_e(lead)
    if shift_exits(lead_e, ck, basis.n_trunc):
        raise TruncationError("fan power would leave the truncation")
    fin_vec = basis.e_to_f(shift_e(lead_e, ck, basis.n_trunc))
    vec_add(fin_vec, basis.e_to_f(target), -1)
    final = vec_norm(vec_clean(fin_vec))

    steps = (
        PipelineStep("steer", t1, max(t1, 1e-300), "head steering residual"),
        PipelineStep("shift-target", t2, max(t2, 1e-300),
                     "after multiplying the steering polynomial by zeta"),
        PipelineStep("damped-target", t3, t3, "after modulus damping"),
        PipelineStep("mid-band", m_mid, m_mid, "leakage between xi and nu"),
        PipelineStep("snap", m_snap, snap_bound, "fan-family snap"),
        PipelineStep("fan", m_fan, fan_bound, "fan residual at the snap"),
        PipelineStep("tail", m_tail, m_tail, "mass above nu"),
    )
    composed = float(t3 + m_mid + snap_bound + fan_bound + m_tail)
    return ComparisonResult(
        direction=direction, j_lead=js, j_follow=j_follow, poly=p,
        damped_ell1=float(q.ell1), k=k0 + 1, power=ck, steps=steps,
        final_residual=final, composed_bound=composed,
        details={
            "snap_distance": float(snap_dist),
            "damped_unit_modulus": bool(q.ell1 < 1),
            "lead_value": j_lead.value,
            "side_condition_ok": j_lead.side_condition_ok,
        },
    )


def _apply_tshift(p: Poly, v: dict, xi: int) -> dict:
    out: dict = {}
    for u, a in enumerate(p.coeffs):
        if a == 0:
            continue
        for i, x in v.items():
            if i + u <= xi:
                out[i + u] = out.get(i + u, 0) + a * x
    return out


# -- report rows ----------------------------------------------------------------------

def unicell_entries(basis, n: int, rng, n_solve: int = 200, n_pairs: int = 30
                    ) -> list[Entry]:
    st = basis.schedule.stage(n)
    entries: list[Entry] = []

    worst = 0.0
    for _ in range(n_solve):
        xi = int(rng.integers(1, 12))
        r = int(rng.integers(0, xi))
        x = rng.standard_normal(xi - r + 1)
        x[0] = x[0] + (2.0 if x[0] >= 0 else -2.0)  # keep the pivot away from 0
        y = rng.standard_normal(xi - r + 1)
        sysm = ToeplitzSystem(xi, r, tuple(x), tuple(y))
        p = solve_poly(sysm)
        worst = max(worst, steering_residual(sysm, p) /
                    max(math.sqrt(float(sum(y * y))), 1e-300))
    entries.append(check(
        "steer.random", f"worst steering residual over {n_solve} random systems",
        worst, 1e-10, asserted=True))

    slope = growth_exponent_fit(8, 3, rng)
    entries.append(check(
        "steer.growth", "log-log growth exponent of |p| in the inverse leading "
        "coordinate vs dimension count xi-r+1 (+0.1)",
        slope, 8 - 3 + 1 + 0.1, asserted=True))

    cprime = steering_constant_estimate(basis, n, rng)
    entries.append(check(
        "steer.constant",
        "empirical steering constant (max |p| * |lead|^(xi-j+1) over a unit "
        "sphere sample) vs the comparison base",
        cprime, None, asserted=False,
        details={"comparison_base": 4.0, "dominated": bool(4.0 >= cprime)}))

    total, failures, antisym = 0, 0, True
    for _ in range(n_pairs):
        x = _random_unit_head(basis, st.xi, rng)
        y = _random_unit_head(basis, st.xi, rng)
        jx = large_coord_index(basis, x, n)
        jy = large_coord_index(basis, y, n)
        if jx is None or jy is None:
            continue
        total += 1
        try:
            r1 = compare_orbits(basis, x, y, n)
            r2 = compare_orbits(basis, y, x, n)
        except Exception:
            failures += 1
            continue
        if jx.j != jy.j:
            antisym &= {r1.direction, r2.direction} == {X_CONTAINS_Y, Y_CONTAINS_X}
    entries.append(check(
        "compare.total",
        f"orbit comparison failed on {failures} of {total} admissible pairs",
        float(failures), 0.0, asserted=True))
    entries.append(check(
        "compare.antisym", "swapping arguments flips the direction whenever "
        "the lead indices differ",
        0.0 if antisym else 1.0, 0.0, asserted=True))
    gated = basis.schedule.n_stages >= 2
    entries.append(check(
        "compare.stages", "multi-stage comparison depth available",
        float(basis.schedule.n_stages), None, asserted=False,
        details={"note": "entries above run at the top built stage; the "
                         "alternating-stage argument needs >= 2 stages",
                 "binding": gated}))
    return entries


def steering_constant_estimate(basis, n: int, rng, samples: int = 200) -> float:
    """Empirical version of the steering-modulus constant: the largest
    |p| * |leading coordinate|^(xi - j + 1) over random unit head pairs.
    Recorded next to the comparison base, never asserted (the two constants
    relate only asymptotically)."""
    st = basis.schedule.stage(n)
    xi = st.xi
    worst = 0.0
    for _ in range(samples):
        x = _random_unit_head(basis, xi, rng)
        y = _random_unit_head(basis, xi, rng)
        ax = basis.f_to_e(x)
        ay = basis.f_to_e(y)
        j = min(i for i, v in ax.items() if abs(v) > 1e-12)
        xs = tuple(ax.get(i, 0) for i in range(j, xi + 1))
        ys = tuple(ay.get(i, 0) for i in range(j, xi + 1))
        p = solve_poly(ToeplitzSystem(xi, j, xs, ys))
        worst = max(worst, float(p.ell1) * abs(xs[0]) ** (xi - j + 1))
    return worst


def growth_exponent_fit(xi: int, r: int, rng) -> float:
    """Robust log-log regression of |p| against 1/ell while the leading
    coordinate ell shrinks.

    Theil-Sen slope: a sign-cancellation in the top coefficient can carve a
    dip into the curve at one scale, which tilts a least-squares line above
    the true exponent; the median of pairwise slopes ignores it.
    """
    from scipy.stats import theilslopes

    base_x = rng.standard_normal(xi - r + 1)
    y = rng.standard_normal(xi - r + 1)
    ells = [2.0 ** -e for e in range(6, 22)]
    logs = []
    for ell in ells:
        x = base_x.copy()
        x[0] = ell
        p = solve_poly(ToeplitzSystem(xi, r, tuple(x), tuple(y)))
        logs.append(math.log(float(p.ell1)))
    res = theilslopes(logs, [math.log(1 / e) for e in ells])
    return float(res[0])


def _random_unit_head(basis, xi: int, rng) -> dict:
    v = rng.standard_normal(xi + 1)
    v /= math.sqrt(float(sum(v * v)))
    return {j: float(c) for j, c in enumerate(v)}
