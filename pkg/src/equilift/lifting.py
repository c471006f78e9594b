"""Inductive shift-covariant lifting over a toast hierarchy.

Each anchor of the hierarchy carries a local solution written in
anchor-relative coordinates u = z - anchor and built purely from difference
data (data-point offsets, gauge offsets, anchor-to-anchor translations), so
the whole recursion commutes with quantized shifts bit for bit; a global
evaluation point is folded into the local frame only at the very end.
Three instantiations share the recursion:

  multiplicative   prescribed zeros; corrections exp(P); log-modulus rates
  additive         prescribed principal parts; corrections P; sup rates
  harmonic         prescribed atomic measures; corrections Re P; sup rates

The assembled psi_n is the single local solution selected by the base-point
chain: the anchor of the level-n region containing the configuration's
covariant centroid (regions grow with n, so once the centroid is covered it
stays covered; below first coverage the nearest base region stands in).
Each psi_n is one global function, so the level-n rate r_n(K) compares two
closed-form solutions and membership of the divisor holds analytically at
every level, not only in the limit.

A rate certificate is `certified` when K lies inside the level-(n-1) region
of the chain: the patching step controlled the ratio on that region's
boundary, and the maximum principle carries the bound inside. Values on
disks that poke outside are reported informationally and never asserted.

The multiplicative base product is normalized at one gauge point per level,
chosen next to the chain anchor of that level. Per-cell normalization would
be equally valid in exact arithmetic, but the value levels of sibling cells
would then differ by the full log-potential spread of the configuration
(hundreds of log units on window-scale data), and no float64 polynomial
correction can bridge such plateaus across nearly-touching regions. A
shared gauge keeps sibling solutions mutually consistent, so every joint
fit sees near-constant data: the constant is the level-to-level re-gauging
factor, estimated by the fit and cancelled exactly in the assembled psi.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import runge
from .builders import EntireApprox, Potential, verify_divisor_match
from .core import (CompactRegion, ComplexPoly, SampledFunction, Window,
                   log_seminorm, q26, sup_seminorm)
from .divisors import Divisor, PrincipalParts
from .errors import DegreeCapExceeded, DivisorMismatch, NonFreeInput, RungeFailure
from .toast import ToastForest, build_covariant_toast

MULTIPLICATIVE = "multiplicative"
ADDITIVE = "additive"
HARMONIC = "harmonic"

_RUNGE_MODE = {
    MULTIPLICATIVE: "multiplicative-log",
    ADDITIVE: "additive",
    HARMONIC: "harmonic",
}


# ---------------------------------------------------------------------------
# local solutions


@dataclass(frozen=True)
class LocalSolution:
    """One anchor's global solution in local coordinates u = z - anchor.

    multiplicative: exp(P(u)) * prod_j ((b_j - u)/(b_j - gauge))^{m_j}
    additive:       P(u) + sum_j sum_k c_{jk} / (u - b_j)^k
    harmonic:       Re P(u) + sum_j mass_j log|u - b_j| / (2 pi)

    The product is evaluated through its logarithm: per-factor ratios stay
    O(1) where the raw product of hundreds of factors would overflow.
    """

    anchor: complex
    mode: str
    offsets: tuple      # b_j = data point - anchor (exact dyadic differences)
    weights: tuple      # mults / principal-part coefficient tuples / masses
    correction: ComplexPoly
    gauge: complex = 0j  # level gauge point - anchor (shared per level)

    def value(self, u):
        u = np.asarray(u, dtype=complex)
        with np.errstate(all="ignore"):
            if self.mode == MULTIPLICATIVE:
                return np.exp(self.log_value(u))
            if self.mode == ADDITIVE:
                out = self.correction(u)
                for b, coeffs in zip(self.offsets, self.weights):
                    du = u - b
                    for j, c in enumerate(coeffs, start=1):
                        out = out + c / du ** j
                return out
            out = np.real(self.correction(u))
            for b, mass in zip(self.offsets, self.weights):
                out = out + mass * np.log(np.abs(u - b)) / (2 * math.pi)
            return out

    def log_value(self, u):
        u = np.asarray(u, dtype=complex)
        out = self.correction(u)
        with np.errstate(all="ignore"):
            for b, m in zip(self.offsets, self.weights):
                out = out + m * np.log((b - u) / (b - self.gauge))
        return out

    def dlog(self, u):
        u = np.asarray(u, dtype=complex)
        out = self.correction.derivative()(u)
        with np.errstate(all="ignore"):
            for b, m in zip(self.offsets, self.weights):
                out = out + m / (u - b)
        return out

    def as_entire(self, window=None) -> EntireApprox:
        """exp(gauge-poly) * genus-0 product form of a multiplicative
        solution. The packed normalization constant grows like the full
        log-potential of the data, so the product form is only usable for
        small configurations; large ones should stay in log form."""
        if self.mode != MULTIPLICATIVE:
            raise ValueError("only multiplicative solutions are entire")
        a = self.anchor
        const = 0j
        for b, m in zip(self.offsets, self.weights):
            loc = a + b
            if loc != 0:
                const += m * np.log(complex(loc))
            else:
                const += m * 1j * math.pi   # (0 - z) = -1 * z
            const -= m * np.log(b - self.gauge)
        shifted = ComplexPoly(self.correction.coeffs,
                              center=self.correction.center + a,
                              scale=self.correction.scale)
        gauge_poly = shifted.add_constant(const)
        locs = tuple(complex(a + b) for b in self.offsets)
        return EntireApprox(locs=locs, mults=tuple(self.weights),
                            gauge=gauge_poly, window=window)


def _gauge_offset(offsets, u0):
    """Normalization point for the product base, in coordinates relative to
    the level's chain anchor.

    The anchor itself when no data point sits there; otherwise half a base
    scale from the anchor, away from the nearest other data point (any
    fixed direction when the anchor is alone); rotated and shrunk
    deterministically if a data point blocks the candidate."""
    if all(abs(b) > 1e-9 for b in offsets):
        return 0j
    others = [b for b in offsets if abs(b) > 1e-9]
    if others:
        a_star = min(others, key=lambda b: (abs(b), b.real, b.imag))
        base = -(u0 / 2) * a_star / abs(a_star)
    else:
        base = complex(u0 / 2)
    for shrink in (1.0, 0.5, 0.25):
        for rot in (1, 1j, -1, -1j):
            g = base * rot * shrink
            if all(abs(b - g) > 1e-9 for b in offsets):
                return g
    raise ValueError("no clear normalization point near the anchor")


# ---------------------------------------------------------------------------
# base point and chain


def _base_point(locs):
    """Covariant centroid: quantized mean of offsets from the first point,
    re-based on that point. Differences are exact for quantized data, so
    the centroid commutes with quantized shifts bit for bit."""
    locs = np.asarray(locs, dtype=complex)
    first = complex(locs[0])
    return first + complex(q26(complex(np.mean(locs - first))))


def _nearest_base_anchor(toast: ToastForest, x):
    best = None
    for anchor, region in toast.levels[0].regions.items():
        d = float(np.min(np.abs(x - region.centers) - region.radii))
        if best is None or d < best[0]:
            best = (d, anchor)
    return best[1]


def _chain_entry(toast: ToastForest, base, n):
    """(level, anchor) of the region holding the base point at stage n;
    below first coverage the nearest base region stands in."""
    hit = toast.fall_down(base, n)
    if hit is not None:
        return hit
    return (0, _nearest_base_anchor(toast, base))


# ---------------------------------------------------------------------------
# consecutive deltas (rate certificates)


def _pair_log_constant(hi: LocalSolution, lo: LocalSolution):
    """log of the constant delta_hi / delta_lo of the two product bases:
    the u-dependent factors (b - u) agree analytically between anchors, so
    only the normalizations survive. The real part is branch-free."""
    total = 0j
    for bh, bl, m in zip(hi.offsets, lo.offsets, hi.weights):
        total += m * (np.log(bl - lo.gauge) - np.log(bh - hi.gauge))
    return complex(total)


def _step_delta(mode, hi, a_hi, lo, a_lo):
    """psi_n / psi_{n-1} (multiplicative) or psi_n - psi_{n-1} (additive /
    harmonic) as one closed-form zero-free expression: shared base data
    cancels exactly, leaving the two correction polynomials and, in the
    multiplicative case, a constant."""
    if hi is lo:
        return None
    p_hi, p_lo = hi.correction, lo.correction

    if mode == MULTIPLICATIVE:
        const = _pair_log_constant(hi, lo)

        def log_delta(z):
            z = np.asarray(z, dtype=complex)
            return p_hi(z - a_hi) - p_lo(z - a_lo) + const

        return SampledFunction(
            evaluator=lambda z: np.exp(log_delta(z)), log_eval=log_delta,
            label="level step ratio")

    def delta(z):
        z = np.asarray(z, dtype=complex)
        out = p_hi(z - a_hi) - p_lo(z - a_lo)
        return np.real(out) if mode == HARMONIC else out

    return SampledFunction(evaluator=delta, label="level step difference")


# ---------------------------------------------------------------------------
# trace types


@dataclass(frozen=True)
class LiftingLevel:
    n: int
    epsilon: float
    solutions: dict          # anchor -> LocalSolution, in anchor order
    chain: tuple             # (level, anchor) selected for psi_n
    certificates: tuple      # dicts: radius, value, certified


@dataclass(frozen=True)
class LiftingTrace:
    mode: str
    data: object             # Divisor | PrincipalParts | Potential
    toast: ToastForest
    levels: tuple            # LiftingLevel, n = 0..N
    tail_bound: float
    window: Window
    base_point: complex = 0j

    @property
    def depth(self):
        return len(self.levels) - 1

    def solution(self, n=None):
        """(level, anchor, LocalSolution) backing psi_n."""
        if n is None:
            n = self.depth
        m, anchor = self.levels[n].chain
        return m, anchor, self.levels[m].solutions[anchor]

    def _declared(self):
        if self.mode == MULTIPLICATIVE:
            return tuple(self.data.locs.tolist()), ()
        if self.mode == ADDITIVE:
            return (), tuple(p for p, _ in self.data.entries)
        return (), tuple(complex(*loc) for loc, _ in self.data.atoms)

    def psi(self, n=None) -> SampledFunction:
        """The stage-n solution as one global function on the window."""
        if not self.levels:
            return SampledFunction(
                evaluator=lambda z: np.zeros(np.shape(z), dtype=complex),
                window=self.window, label="psi empty")
        m, anchor, sol = self.solution(n)
        zeros, sings = self._declared()
        dlog = log_eval = None
        if self.mode == MULTIPLICATIVE:
            dlog = lambda z: sol.dlog(np.asarray(z, dtype=complex) - anchor)
            log_eval = lambda z: sol.log_value(
                np.asarray(z, dtype=complex) - anchor)
        return SampledFunction(
            evaluator=lambda z: sol.value(np.asarray(z, dtype=complex) - anchor),
            window=self.window, zeros=zeros, singularities=sings,
            dlog=dlog, log_eval=log_eval,
            label=f"psi_{self.depth if n is None else n}")

    def rate(self, n, K: CompactRegion, density=64) -> float:
        """r_n(K): seminorm of the step from psi_{n-1} to psi_n, measurable
        at any sampling density. Zero exactly when the chain is stagnant."""
        if not 1 <= n <= self.depth:
            raise ValueError("rate needs 1 <= n <= depth")
        m_hi, a_hi = self.levels[n].chain
        m_lo, a_lo = self.levels[n - 1].chain
        delta = _step_delta(self.mode,
                            self.levels[m_hi].solutions[a_hi], a_hi,
                            self.levels[m_lo].solutions[a_lo], a_lo)
        if delta is None:
            return 0.0
        if self.mode == MULTIPLICATIVE:
            return log_seminorm(delta, K, density=density)
        return sup_seminorm(delta, K, density=density)

    def verify_membership(self, n=None, position_tol=1e-8):
        """Divisor of psi_n against the data on the inner window (argument
        principle plus root refinement); multiplicative traces only."""
        if self.mode != MULTIPLICATIVE:
            raise ValueError("membership checks apply to zero prescriptions")
        inner = self.data.restrict(self.window.inner(0.15))
        report = verify_divisor_match(self.psi(n), inner,
                                      position_tol=position_tol,
                                      check_total=False)
        return report

    def to_json(self):
        if self.mode == MULTIPLICATIVE:
            data = {"divisor": self.data.to_json()}
        elif self.mode == ADDITIVE:
            data = {"principal_parts": self.data.to_json()}
        else:
            data = {"potential": self.data.to_json()}
        toast_meta = {}
        if self.toast is not None:
            toast_meta = {"r0": self.toast.r0, "gamma": self.toast.gamma,
                          "u0": self.toast.u0}
        return {
            "mode": self.mode,
            **data,
            "window": self.window.as_list(),
            "base_point": [self.base_point.real, self.base_point.imag],
            "tail_bound": self.tail_bound,
            **toast_meta,
            "levels": [
                {
                    "n": lv.n,
                    "epsilon": lv.epsilon,
                    "chain": [lv.chain[0], [lv.chain[1].real, lv.chain[1].imag]],
                    "anchors": [
                        {
                            "anchor": [a.real, a.imag],
                            "gauge": [s.gauge.real, s.gauge.imag],
                            "correction": s.correction.to_json(),
                        }
                        for a, s in lv.solutions.items()
                    ],
                    "certificates": [dict(c) for c in lv.certificates],
                }
                for lv in self.levels
            ],
        }


@dataclass(frozen=True)
class EquivarianceReport:
    """Double-run comparison: the solution built from shifted data versus
    the shifted solution built from the original data."""

    shift: complex
    deviation: float          # nan when the pipeline refused the input
    threshold: float
    passed: bool
    refusal: str = ""
    grid_points: int = 0

    def to_json(self):
        return {
            "shift": [self.shift.real, self.shift.imag],
            "deviation": self.deviation,
            "threshold": self.threshold,
            "passed": self.passed,
            "refusal": self.refusal,
            "grid_points": self.grid_points,
        }


# ---------------------------------------------------------------------------
# the recursion


def _workers():
    try:
        return max(1, int(os.environ.get("EQUILIFT_THREADS", "1")))
    except ValueError:
        return 1


def _map_anchors(fn, anchors):
    """Anchor-order result collection; worker count must not affect output."""
    w = _workers()
    if w == 1 or len(anchors) <= 1:
        return {a: fn(a) for a in anchors}
    with ThreadPoolExecutor(max_workers=w) as ex:
        return dict(zip(anchors, ex.map(fn, anchors)))


def _target(mode, prev: LocalSolution, tau, offsets, gauge):
    """The patching datum on one predecessor region, in the current
    anchor's coordinates: base terms cancel between anchors, so only the
    predecessor's correction and, multiplicatively, a constant survive."""
    if mode == MULTIPLICATIVE:
        log_c = 0j
        for b_cur, b_prev, m in zip(offsets, prev.offsets, prev.weights):
            log_c += m * (np.log(b_cur - gauge) - np.log(b_prev - prev.gauge))

        def log_q(u, _p=prev.correction, _t=tau, _c=log_c):
            return _p(np.asarray(u, dtype=complex) - _t) + _c

        return SampledFunction(evaluator=lambda u: np.exp(log_q(u)),
                               log_eval=log_q, label="patch ratio")
    if mode == ADDITIVE:
        return SampledFunction(
            evaluator=lambda u, _p=prev.correction, _t=tau:
                _p(np.asarray(u, dtype=complex) - _t),
            label="patch difference")
    return SampledFunction(
        evaluator=lambda u, _p=prev.correction, _t=tau:
            np.real(_p(np.asarray(u, dtype=complex) - _t)),
        label="patch difference")


def _solve_anchor(mode, n, anchor, toast, prev_sols, locs, weights, epsilon,
                  gauge_pt):
    offsets = tuple(complex(a) - anchor for a in locs)
    gauge = complex(gauge_pt) - anchor if mode == MULTIPLICATIVE else 0j
    children = toast.children.get((n, anchor), ()) if n > 0 else ()
    if not children:
        correction = ComplexPoly((0j,))
    else:
        targets = []
        for _, ca in children:
            prev = prev_sols[ca]
            tau = complex(ca) - anchor
            region = toast.region(n - 1, ca).translate(-anchor)
            targets.append((region, _target(mode, prev, tau, offsets, gauge)))
        problem = runge.RungeProblem(tuple(targets), epsilon=epsilon,
                                     mode=_RUNGE_MODE[mode])
        # taming on the full own region keeps this correction plateau-scale
        # on the territory the next level will sample
        tame = toast.region(n, anchor).translate(-anchor)
        try:
            cert = runge.solve(problem, tame_region=tame)
        except DegreeCapExceeded:
            # retry once with a doubled cap to separate conditioning
            # trouble from genuine infeasibility
            try:
                cert = runge.solve(problem, tame_region=tame,
                                   degree_cap=2 * runge.DEFAULT_CAP)
            except DegreeCapExceeded as exc:
                raise RungeFailure(
                    f"patching failed at epsilon {epsilon}: {exc}",
                    level=n, anchor=anchor) from exc
        correction = cert.poly
    return LocalSolution(anchor=anchor, mode=mode, offsets=offsets,
                         weights=weights, correction=correction, gauge=gauge)


def _ladder(base):
    return tuple(CompactRegion([complex(base)], [2.0 ** j]) for j in range(4))


def _certify_level(mode, levels, toast, n, ladder, epsilon):
    """Ladder rates for the step n-1 -> n, with the paper-backed flag: a
    disk inside the chain's level-(n-1) region is covered by the patching
    bound and must come in under epsilon."""
    hi_m, hi_a = levels[n].chain
    lo_m, lo_a = levels[n - 1].chain
    hi = levels[hi_m].solutions[hi_a]
    lo = levels[lo_m].solutions[lo_a]
    delta = _step_delta(mode, hi, hi_a, lo, lo_a)
    region_lo = toast.region(lo_m, lo_a)
    controlled = (delta is None) or (
        hi_m == n and lo_m == n - 1
        and (lo_m, lo_a) in toast.children.get((hi_m, hi_a), ()))
    norm = log_seminorm if mode == MULTIPLICATIVE else sup_seminorm
    rows = []
    for K in ladder:
        value = 0.0 if delta is None else norm(delta, K)
        certified = bool(controlled and K.contained_in(region_lo))
        rows.append({"radius": float(K.radii[0]), "value": value,
                     "certified": certified})
        if certified and not value < epsilon:
            raise RungeFailure(
                f"certified rate {value} at radius {K.radii[0]} "
                f"is not below {epsilon}", level=n, anchor=hi_a)
    return tuple(rows)


def _config_locs(mode, data):
    if mode == MULTIPLICATIVE:
        return tuple(data.locs.tolist()), tuple(int(m) for m in data.mults)
    if mode == ADDITIVE:
        return (tuple(p for p, _ in data.entries),
                tuple(coeffs for _, coeffs in data.entries))
    locs = tuple(complex(*loc) for loc, _ in data.atoms)
    return locs, tuple(mass for _, mass in data.atoms)


def _check_toast_matches(toast, locs):
    got = np.sort_complex(np.asarray(toast.divisor.locs, dtype=complex))
    want = np.sort_complex(np.asarray(locs, dtype=complex))
    if got.shape != want.shape or not np.array_equal(got, want):
        raise ValueError("toast was not built from this configuration")


_DEFAULT_EMPTY_WINDOW = Window(-1.0, 1.0, -1.0, 1.0)


def _empty_trace(mode, data, window):
    return LiftingTrace(mode=mode, data=data, toast=None, levels=(),
                        tail_bound=0.0, window=window)


def _lift(mode, data, toast, levels, check_membership=True):
    locs, weights = _config_locs(mode, data)
    N = int(levels)
    if N < 0:
        raise ValueError("levels must be nonnegative")
    if toast is None or not locs:
        raise ValueError("a toast built from the data is required")
    _check_toast_matches(toast, locs)
    if N > toast.depth:
        raise ValueError(f"toast depth {toast.depth} is below levels {N}")
    window = toast.divisor.window
    base = _base_point(locs)
    ladder = _ladder(base)
    out_levels = []
    for n in range(N + 1):
        epsilon = 2.0 ** (-n)
        prev = out_levels[-1].solutions if out_levels else {}
        chain = _chain_entry(toast, base, n)
        # one gauge point per level, next to the chain anchor: sibling
        # solutions must share value levels or no polynomial correction
        # could bridge them (see the module docstring)
        chain_a = complex(chain[1])
        gauge_pt = chain_a + _gauge_offset(
            tuple(complex(a) - chain_a for a in locs), toast.u0)

        def solve_one(anchor, _n=n, _prev=prev, _eps=epsilon, _g=gauge_pt):
            return _solve_anchor(mode, _n, anchor, toast, _prev, locs,
                                 weights, _eps, _g)

        sols = _map_anchors(solve_one, toast.levels[n].anchors)
        out_levels.append(LiftingLevel(n=n, epsilon=epsilon, solutions=sols,
                                       chain=chain, certificates=()))
        if n >= 1:
            certs = _certify_level(mode, out_levels, toast, n, ladder, epsilon)
            out_levels[-1] = LiftingLevel(n=n, epsilon=epsilon, solutions=sols,
                                          chain=chain, certificates=certs)
    trace = LiftingTrace(mode=mode, data=data, toast=toast,
                         levels=tuple(out_levels), tail_bound=2.0 ** (-N),
                         window=window, base_point=base)
    if check_membership and mode == MULTIPLICATIVE:
        report = trace.verify_membership()
        if not report["matched"]:
            raise DivisorMismatch(
                f"final solution misses the divisor: "
                f"{report['mismatches'][:3]}")
    return trace


# ---------------------------------------------------------------------------
# public operations


def lift_weierstrass(d: Divisor, toast: ToastForest, levels,
                     check_membership=True) -> LiftingTrace:
    """Entire functions with zero set d, built level by level with
    zero-free multiplicative patching."""
    if not d.is_nonnegative():
        raise ValueError("zero prescription needs a nonnegative divisor")
    if not len(d.locs):
        raise ValueError("empty divisor: the constant 1 needs no lifting")
    return _lift(MULTIPLICATIVE, d, toast, levels, check_membership)


def lift_mittag_leffler(pp: PrincipalParts, toast, levels) -> LiftingTrace:
    """Meromorphic functions with prescribed principal parts, additive
    patching. Empty prescriptions return the zero trace directly."""
    if not pp.entries:
        return _empty_trace(ADDITIVE, pp, _DEFAULT_EMPTY_WINDOW)
    return _lift(ADDITIVE, pp, toast, levels, check_membership=False)


def lift_poisson_2d(mu: Potential, toast, levels) -> LiftingTrace:
    """Subharmonic potentials with prescribed atomic Riesz measure,
    harmonic patching."""
    if mu.dim != 2:
        raise ValueError("planar lifting needs dim=2 atoms")
    if not mu.atoms:
        return _empty_trace(HARMONIC, mu, _DEFAULT_EMPTY_WINDOW)
    return _lift(HARMONIC, mu, toast, levels, check_membership=False)


def verify_equivariance(data, w, mode="weierstrass", levels=3, r0=1.0,
                        gamma=4.0, threshold=1e-6, grid_n=12, window=None,
                        check_membership=False,
                        base_trace=None) -> EquivarianceReport:
    """Run the full pipeline (markers, toast, lifting) independently on the
    data and on the data shifted by -w, then compare psi_{data-w}(z) with
    psi_data(z+w) on a grid over the overlap. Refusals (non-free input) are
    recorded, not raised. A prebuilt trace for the unshifted data can be
    passed to avoid rebuilding it."""
    w = complex(q26(w))
    if mode == "weierstrass":
        win = data.window

        def run(shift):
            d = data.translate(-shift, move_window=True) if shift else data
            toast = build_covariant_toast(d, levels, r0=r0, gamma=gamma)
            return lift_weierstrass(d, toast, levels,
                                    check_membership=check_membership)
    elif mode == "poisson":
        if window is None:
            raise ValueError("poisson equivariance needs a window")
        win = window
        base_atoms = data.atoms

        def run(shift):
            if shift:
                mu = Potential(tuple(((loc[0] - shift.real,
                                       loc[1] - shift.imag), mass)
                                     for loc, mass in base_atoms), dim=2)
                cfg_win = win.translate(-shift)
            else:
                mu, cfg_win = data, win
            pts = [(complex(*loc), 1) for loc, _ in mu.atoms]
            cfg = Divisor.from_points(pts, cfg_win)
            toast = build_covariant_toast(cfg, levels, r0=r0, gamma=gamma)
            return lift_poisson_2d(mu, toast, levels)
    else:
        raise ValueError(f"unknown equivariance mode {mode!r}")

    try:
        trace_a = base_trace if base_trace is not None else run(0j)
        trace_b = run(w)
    except NonFreeInput as exc:
        return EquivarianceReport(shift=w, deviation=float("nan"),
                                  threshold=threshold, passed=False,
                                  refusal=f"NonFreeInput: {exc}")
    box = Window(win.xmin + max(0.0, -w.real), win.xmax + min(0.0, -w.real),
                 win.ymin + max(0.0, -w.imag), win.ymax + min(0.0, -w.imag))
    grid = box.inner(0.15).grid(max(box.width, box.height) / grid_n)
    va = np.asarray(trace_a.psi()(grid + w))
    vb = np.asarray(trace_b.psi()(grid))
    deviation = float(np.max(np.abs(vb - va) / (1.0 + np.abs(va))))
    return EquivarianceReport(shift=w, deviation=deviation,
                              threshold=threshold,
                              passed=bool(deviation < threshold),
                              grid_points=int(grid.size))


def poisson_submean_probe(trace: LiftingTrace, seed=0, count=50,
                          rmin=0.1, rmax=1.0, nodes=256):
    """Random circle probes of the sub-mean-value inequality for the final
    solution of a harmonic trace. Circles passing within 0.1 of an atom are
    re-drawn (trapezoid quadrature cannot see through a log singularity)."""
    if trace.mode != HARMONIC:
        raise ValueError("sub-mean-value probes apply to harmonic traces")
    psi = trace.psi()
    atoms = np.array([complex(*loc) for loc, _ in trace.data.atoms],
                     dtype=complex)
    win = trace.window.inner(0.2)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    theta = 2 * np.pi * np.arange(nodes) / nodes
    ring = np.exp(1j * theta)
    rows = []
    guard = 0
    while len(rows) < count and guard < 50 * count:
        guard += 1
        c = complex(rng.uniform(win.xmin, win.xmax),
                    rng.uniform(win.ymin, win.ymax))
        r = float(rng.uniform(rmin, rmax))
        if len(atoms):
            dist = np.abs(atoms - c)
            if np.min(dist) < 0.1 or np.min(np.abs(dist - r)) < 0.1:
                continue
        u_c = float(np.real(psi(c)))
        mean = float(np.mean(np.real(psi(c + r * ring))))
        rows.append({"center": c, "radius": r, "u_center": u_c,
                     "sphere_mean": mean, "slack": mean - u_c})
    if len(rows) < count:
        raise ValueError("could not place the requested probe count")
    return rows
