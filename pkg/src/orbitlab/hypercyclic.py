"""Approximation certificates along fan powers.

The central pipeline: project a vector onto the head block, solve for a
polynomial steering the truncated shift onto the first basis vector, damp
its modulus through the b-fan, snap to the nearest fan polynomial, and
measure how close the corresponding operator power lands.  Every step is
measured on actual vectors; the composed bound is a sum of per-step bounds
each of which is checked against the step it covers, so the final residual
is provably below the composed bound whenever the arithmetic is sane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .basis import (BasisMap, poly_shift_apply, shift_e, shift_exits, solve_F,
                    vec_add, vec_clean, vec_norm)
from .errors import PreconditionError, SupportError, TruncationError
from .operators import conjugated_power, sigma_max_block, sup_e_norm
from .polynet import Poly, b_damped, nearest_member
from .report import Entry, check
from .schedule import RATIONAL
from .unicell import solve_poly, ToeplitzSystem


# -- elementary residuals ---------------------------------------------------------

def support_max(x: dict) -> int:
    return max((j for j, v in x.items() if v != 0), default=-1)


def frame_constant(basis: BasisMap, n: int) -> float:
    """Measured equivalence constant between head-block e-coordinates and the
    ambient norm on span f_[0, nu_n] (largest singular value of the block)."""
    for rec in basis.calibration:
        if rec.stage == n:
            return rec.frame_constant
    from .basis import _measure_frame_constant

    return _measure_frame_constant(basis.F_cols, basis.schedule.stage(n).nu,
                                   basis.schedule.scalar_field)


def fan_residual(basis: BasisMap, x_f: dict, n: int, k: int) -> float:
    """||T^{c_k} x - p_k(T) x|| for x supported in [0, nu_n], computed exactly
    in the e-frame."""
    st = basis.schedule.stage(n)
    if support_max(x_f) > st.nu:
        raise SupportError(f"vector must be supported in [0, {st.nu}]")
    ck = st.c[k - 1]
    p = basis.families[n - 1][k - 1]
    alpha = basis.f_to_e(x_f)
    if shift_exits(alpha, ck + max(p.degree, 0), basis.n_trunc):
        raise TruncationError("fan power would leave the truncation")
    diff = shift_e(alpha, ck, basis.n_trunc)
    vec_add(diff, poly_shift_apply(p, alpha, basis.n_trunc), -1)
    return vec_norm(basis.e_to_f(vec_clean(diff)))


def fan_residual_bound(basis: BasisMap, n: int) -> float:
    """Operator-norm bound gamma_n * frame_constant of the fan residual map;
    equals the stage tolerance delta_n after calibration."""
    return float(basis.gamma(n)) * frame_constant(basis, n)


def b_identity_residual(basis: BasisMap, x_f: dict, n: int) -> float:
    """||(T^b / b - I) T x|| for x supported in [0, xi_n]."""
    st = basis.schedule.stage(n)
    if support_max(x_f) > st.xi:
        raise SupportError(f"vector must be supported in [0, {st.xi}]")
    alpha = basis.f_to_e(x_f)
    tx = shift_e(alpha, 1, basis.n_trunc)
    diff = {i: v / st.b for i, v in shift_e(tx, st.b, basis.n_trunc).items()}
    vec_add(diff, tx, -1)
    return vec_norm(basis.e_to_f(vec_clean(diff)))


def b_identity_constant(basis: BasisMap, n: int) -> tuple[float, list[float]]:
    """Measured C with ||(T^b/b - I) T x|| <= C/b ||x|| on span e_[0, xi_n]:
    b times the operator norm of the residual map, plus per-basis values."""
    st = basis.schedule.stage(n)
    import numpy as np
    from scipy import sparse

    cols = []
    per_vec = []
    for j in range(st.xi + 1):
        alpha = {j: 1}
        tx = shift_e(alpha, 1, basis.n_trunc)
        diff = {i: v / st.b for i, v in shift_e(tx, st.b, basis.n_trunc).items()}
        vec_add(diff, tx, -1)
        f = basis.e_to_f(vec_clean(diff))
        per_vec.append(vec_norm(f))
        cols.append(f)
    rows_idx, cols_idx, vals = [], [], []
    for j, col in enumerate(cols):
        for i, v in col.items():
            rows_idx.append(i)
            cols_idx.append(j)
            vals.append(float(v))
    M = sparse.csc_matrix((vals, (rows_idx, cols_idx)),
                          shape=(basis.n_trunc + 1, st.xi + 1))
    sigma = float(np.linalg.svd(M[M.getnnz(axis=1) > 0, :].toarray(),
                                compute_uv=False)[0]) if M.nnz else 0.0
    return st.b * sigma, per_vec


def shade_measurements(basis: BasisMap, n: int):
    """(sigma, interior_ratios): norm of the (b+1)-st power restricted to the
    f-span of (xi_n, nu_n], plus the exact per-column ratios on interior
    shade columns (both j and j + b + 1 inside b-lay-offs)."""
    from . import geometry as geo

    st = basis.schedule.stage(n)
    if basis.n_trunc < st.nu + st.b + 1:
        raise TruncationError("truncation must cover nu_n + b_n + 1")
    P = conjugated_power(basis, st.b + 1)
    sigma = sigma_max_block(P, slice(0, basis.n_trunc + 1),
                            slice(st.xi + 1, st.nu + 1))
    ratios = []
    for j in range(st.xi + 1, st.nu + 1):
        t1 = geo.classify(j, basis.schedule)
        if not geo.is_layoff(t1):
            continue
        t2 = geo.classify(j + st.b + 1, basis.schedule)
        if isinstance(t2, geo.BLayOff):
            col = P[:, j].tocoo()
            entries = {int(i): v for i, v in zip(col.row, col.data)}
            ratios.append((j, entries.get(j + st.b + 1, 0.0), len(entries)))
    return sigma, ratios


# -- the certificate pipeline ------------------------------------------------------

@dataclass(frozen=True)
class PipelineStep:
    name: str
    measured: float
    bound: float
    note: str = ""


@dataclass
class Certificate:
    stage: int
    power: int
    k: int
    target: dict
    precondition_value: float
    threshold: float
    solver_poly: Poly
    damped_poly: Poly
    snapped_poly: Poly
    snap_distance: float
    steps: tuple[PipelineStep, ...]
    final_residual: float
    composed_bound: float
    recomputed_final: float
    details: dict = field(default_factory=dict)

    def verify(self, tol: float = 1e-9) -> list[str]:
        """Recheck the internal bookkeeping; returns a list of problems."""
        bad = []
        if abs(self.final_residual - self.recomputed_final) > tol * max(
                1.0, abs(self.final_residual)):
            bad.append("independent recomputation of the final residual differs")
        if self.final_residual > self.composed_bound * (1 + tol) + 1e-300:
            bad.append("final residual exceeds the composed bound")
        for s in self.steps:
            if s.measured > s.bound * (1 + tol) + 1e-300:
                bad.append(f"step {s.name}: measured exceeds its bound")
        return bad

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "power": self.power,
            "k": self.k,
            "precondition_value": self.precondition_value,
            "threshold": self.threshold,
            "solver_poly": [repr(c) for c in self.solver_poly.coeffs],
            "damped_poly": [repr(c) for c in self.damped_poly.coeffs],
            "snapped_poly": [repr(c) for c in self.snapped_poly.coeffs],
            "snap_distance": self.snap_distance,
            "steps": [
                {"name": s.name, "measured": s.measured, "bound": s.bound,
                 "note": s.note} for s in self.steps
            ],
            "final_residual": self.final_residual,
            "composed_bound": self.composed_bound,
            "recomputed_final": self.recomputed_final,
            "details": {k: repr(v) for k, v in self.details.items()},
        }


def _power_norms(basis: BasisMap, x_e: dict, powers) -> dict[int, float]:
    out = {}
    for u in powers:
        out[u] = vec_norm(basis.e_to_f(shift_e(x_e, u, basis.n_trunc)))
    return out


def certify_hypercyclic_step(basis: BasisMap, x_f: dict, n: int,
                             threshold: Optional[float] = None,
                             target_index: int = 1) -> Certificate:
    """Certificate that some fan power of the operator carries x near e_1.

    Requires the head e_0-coordinate of x to clear the stage threshold
    (default 2^-n); vectors below it are refused, since the solve step has
    nothing to steer with.
    """
    sched = basis.schedule
    st = sched.stage(n)
    if threshold is None:
        threshold = 2.0 ** (-n)
    x_f = vec_clean(x_f)
    if not x_f:
        raise PreconditionError("zero vector refused")

    head = basis.project_f(x_f, 0, st.xi)
    mid = basis.project_f(x_f, st.xi + 1, st.nu)
    body = basis.project_f(x_f, 0, st.nu)
    tail = {j: v for j, v in x_f.items() if j > st.nu}

    alpha = basis.f_to_e(head)
    a0 = alpha.get(0, 0)
    if abs(a0) < threshold:
        raise PreconditionError(
            f"head e_0 coordinate {abs(a0):.3g} below threshold {threshold:.3g}"
        )

    # solve p (zeta divides p automatically: the target has no e_0 component)
    target_e = {target_index: 1}
    xi_range = list(range(0, st.xi + 1))
    x_vec = [alpha.get(j, 0) for j in xi_range]
    y_vec = [target_e.get(j, 0) for j in xi_range]
    p = solve_poly(ToeplitzSystem(st.xi, 0, tuple(x_vec), tuple(y_vec)))
    solve_vec = _apply_truncated(p, alpha, st.xi)
    vec_add(solve_vec, target_e, -1)
    m_solve = vec_norm(basis.e_to_f(vec_clean(solve_vec)))

    # spill of the plain shift past the truncated one
    full = poly_shift_apply(p, alpha, basis.n_trunc)
    spill = dict(full)
    vec_add(spill, _apply_truncated(p, alpha, st.xi), -1)
    m_spill = vec_norm(basis.e_to_f(vec_clean(spill)))

    # modulus damping through the b-fan
    q = b_damped(p, st.b, degree_cap=st.nu)
    q_vec = {i: v / st.b for i, v in shift_e(full, st.b, basis.n_trunc).items()}
    damp = dict(q_vec)
    vec_add(damp, full, -1)
    m_damp = vec_norm(basis.e_to_f(vec_clean(damp)))

    # mid-band leakage of the damped polynomial
    mid_e = basis.f_to_e(mid)
    m_mid = vec_norm(basis.e_to_f(poly_shift_apply(q, mid_e, basis.n_trunc)))

    # snap to the fan family
    family = basis.families[n - 1][: st.k]
    k0, snap_dist = nearest_member(family, q)
    pk = family[k0]
    ck = st.c[k0]
    body_e = basis.f_to_e(body)
    dq = _poly_sub(q, pk)
    m_snap = vec_norm(basis.e_to_f(poly_shift_apply(dq, body_e, basis.n_trunc)))
    powers = [u for u, a in enumerate(dq.coeffs) if a != 0]
    pw = _power_norms(basis, body_e, powers)
    snap_bound = float(sum(abs(a) * pw[u] for u, a in enumerate(dq.coeffs) if a != 0))

    # fan residual on the body
    m_fan = fan_residual(basis, body, n, k0 + 1)
    fan_bound = fan_residual_bound(basis, n) * vec_norm(body)

    # tail carried by the fan power
    if tail:
        tail_e = basis.f_to_e(tail)
        if shift_exits(tail_e, ck, basis.n_trunc):
            raise TruncationError("tail would be pushed past the truncation")
        m_tail = vec_norm(basis.e_to_f(shift_e(tail_e, ck, basis.n_trunc)))
    else:
        m_tail = 0.0

    steps = (
        PipelineStep("solve", m_solve, max(m_solve, 1e-300),
                     "truncated-shift steering residual (exact solve)"),
        PipelineStep("shift-spill", m_spill, m_spill,
                     "plain shift vs truncated shift on the head"),
        PipelineStep("damping", m_damp, m_damp,
                     "modulus reduction through the b-fan"),
        PipelineStep("mid-band", m_mid, m_mid,
                     "damped polynomial applied between xi and nu"),
        PipelineStep("snap", m_snap, snap_bound,
                     "distance to the nearest fan polynomial, times measured "
                     "power norms"),
        PipelineStep("fan", m_fan, fan_bound,
                     "fan residual at the snapped index (calibrated bound)"),
        PipelineStep("tail", m_tail, m_tail,
                     "mass above nu carried by the fan power"),
    )
    composed = float(sum(s.bound for s in steps))

    # final residual, two routes
    x_e = basis.f_to_e(x_f)
    if shift_exits(x_e, ck, basis.n_trunc):
        raise TruncationError("fan power would leave the truncation")
    final_e = shift_e(x_e, ck, basis.n_trunc)
    target_f = {target_index: 1}
    fin = basis.e_to_f(final_e)
    vec_add(fin, target_f, -1)
    final = vec_norm(vec_clean(fin))
    fin2 = solve_F(basis, final_e)
    vec_add(fin2, target_f, -1)
    recomputed = vec_norm(vec_clean(fin2))

    return Certificate(
        stage=n, power=ck, k=k0 + 1, target=target_f,
        precondition_value=float(abs(a0)), threshold=threshold,
        solver_poly=p, damped_poly=q, snapped_poly=pk,
        snap_distance=float(snap_dist), steps=steps,
        final_residual=final, composed_bound=composed,
        recomputed_final=recomputed,
        details={"mode": basis.mode, "head_support": st.xi, "body_support": st.nu},
    )


def _apply_truncated(p: Poly, v: dict, xi: int) -> dict:
    out: dict = {}
    for u, a in enumerate(p.coeffs):
        if a == 0:
            continue
        for i, x in v.items():
            if i + u <= xi:
                out[i + u] = out.get(i + u, 0) + a * x
    return out


def _poly_sub(p: Poly, q: Poly) -> Poly:
    n = max(len(p.coeffs), len(q.coeffs))
    pa = p.coeffs + (0,) * (n - len(p.coeffs))
    qa = q.coeffs + (0,) * (n - len(q.coeffs))
    return Poly(tuple(a - b for a, b in zip(pa, qa)))


# -- modulus-reduction chain --------------------------------------------------------

@dataclass(frozen=True)
class ChainLink:
    level: int
    k: int
    power: int
    measured: float
    note: str


@dataclass(frozen=True)
class ChainCertificate:
    levels: int
    links: tuple[ChainLink, ...]
    final_measured: float
    composed_bound: float


def modulus_reduction_chain(basis: BasisMap, x_f: dict, p: Poly, n: int
                            ) -> ChainCertificate:
    """Reduce a polynomial of modulus up to 2^j to unit modulus: one fan
    certificate at the bottom level, then j doubling links, each recorded
    with its measured residual."""
    st = basis.schedule.stage(n)
    family = basis.families[n - 1][: st.k]
    ell1 = float(p.ell1)
    j = max(0, math.ceil(math.log2(max(ell1, 1e-300))))
    x_e = basis.f_to_e(vec_clean(x_f))

    def power_vec(ck):
        return shift_e(x_e, ck, basis.n_trunc)

    links = []
    scale = 2.0 ** (-j) if basis.mode != RATIONAL else Fraction(1, 2 ** j)
    qj = p.scale(scale)
    kj, _ = nearest_member(family, qj)
    rj_vec = basis.e_to_f(power_vec(st.c[kj]))
    qv = basis.e_to_f(poly_shift_apply(qj, x_e, basis.n_trunc))
    diff = dict(rj_vec)
    vec_add(diff, qv, -1)
    links.append(ChainLink(j, kj + 1, st.c[kj], vec_norm(vec_clean(diff)),
                           "base level: fan power vs the scaled polynomial"))
    k_prev = kj
    composed = (2.0 ** j) * links[0].measured
    for level in range(j - 1, -1, -1):
        target = family[k_prev].scale(2)
        k_cur, _ = nearest_member(family, target)
        cur = basis.e_to_f(power_vec(st.c[k_cur]))
        prev2 = basis.e_to_f(power_vec(st.c[k_prev]))
        diff = dict(cur)
        vec_add(diff, prev2, -2)
        m = vec_norm(vec_clean(diff))
        links.append(ChainLink(level, k_cur + 1, st.c[k_cur], m,
                               "doubling link"))
        composed += (2.0 ** level) * m
        k_prev = k_cur
    final_vec = basis.e_to_f(power_vec(st.c[k_prev]))
    pv = basis.e_to_f(poly_shift_apply(p, x_e, basis.n_trunc))
    diff = dict(final_vec)
    vec_add(diff, pv, -1)
    final = vec_norm(vec_clean(diff))
    return ChainCertificate(j, tuple(links), final, composed)


# -- report rows -----------------------------------------------------------------

def fan_entries(basis: BasisMap, n: int, rng=None, samples: int = 20) -> list[Entry]:
    st = basis.schedule.stage(n)
    entries = []
    bound = fan_residual_bound(basis, n)
    entries.append(check(
        f"fan.opbound.stage{n}",
        "operator-norm bound of the fan residual map (gamma times measured "
        "frame constant) vs the stage tolerance",
        bound, st.delta, asserted=True,
        details={"gamma": repr(basis.gamma(n)),
                 "frame_constant": frame_constant(basis, n)}))
    if rng is not None:
        # the measured route subtracts head chains; float can carry that
        # cancellation only while the chain entries stay exactly representable
        chain_scale = sup_e_norm(basis, min(st.nu, basis.n_trunc))
        if basis.mode == RATIONAL or chain_scale <= 2.0 ** 50:
            worst = 0.0
            for _ in range(samples):
                x = {j: float(v)
                     for j, v in enumerate(rng.standard_normal(st.nu + 1))}
                nx = vec_norm(x)
                for k in range(1, st.k + 1):
                    worst = max(worst, fan_residual(basis, x, n, k) / nx)
            entries.append(check(
                f"fan.sampled.stage{n}",
                f"largest sampled fan residual over {samples} random supported "
                "vectors (ratio to the vector norm)",
                worst, st.delta, asserted=True))
        else:
            entries.append(check(
                f"fan.sampled.stage{n}",
                "sampling skipped: head-chain entries exceed exact float "
                "range, the cancellation needs exact weights (the operator "
                "bound above still binds)",
                None, st.delta, asserted=False,
                details={"chain_scale": chain_scale}))
    return entries


def bfan_entries(basis: BasisMap, n: int) -> list[Entry]:
    from .operators import b_calibrated

    st = basis.schedule.stage(n)
    entries = []
    C, per_vec = b_identity_constant(basis, n)
    worst = max(per_vec)
    entries.append(check(
        f"bfan.identity.stage{n}",
        "damping identity residual on the head basis vs measured C/b",
        worst, C / st.b, asserted=True,
        details={"measured_C": C, "per_vector": per_vec}))
    b_ok, b_info = b_calibrated(basis, n)
    sigma, ratios = shade_measurements(basis, n)
    entries.append(check(
        f"bfan.shade.stage{n}",
        "norm of the (b+1)-st power on the f-span of the b-fan block vs 2.5",
        sigma.value, 2.5, asserted=b_ok, details={**b_info,
                                                  "interior_columns": len(ratios)}))
    interior_worst = max((abs(v) for _, v, nnz in ratios if nnz == 1), default=0.0)
    entries.append(check(
        f"bfan.shade.interior.stage{n}",
        "exact single-entry ratio on interior shade columns vs 2",
        interior_worst, 2.0, asserted=True,
        details={"expected_ratio": 2.0 ** (1 / math.sqrt(st.b))}))
    return entries
