"""Polynomial patching engines: joint least-squares approximation of data
prescribed on disjoint compact disk unions, with escalating degree and
resample-checked error certificates.

Sampling is boundary-only: every mode here carries data that is analytic,
zero-free analytic, or harmonic near the targets, so the maximum principle
makes the boundary sup equal to the sup over the region. The approximant is
framed at a covariant center (anchor-relative centroid, quantized) and
rescaled by the sample spread, which keeps fits bit-reproducible under
quantized translations of the whole problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import CompactRegion, ComplexPoly, SampledFunction, as_sampled, q26
from .errors import BranchInconsistency, DegreeCapExceeded, ZeroInK

DEGREE_LADDER = (2, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 120)
DEFAULT_CAP = 120
RCOND = 1e-13
TAME_WEIGHT = 1e-3


@dataclass(frozen=True)
class RungeProblem:
    """targets: ((CompactRegion, data), ...) with pairwise disjoint regions
    whose union leaves the complement connected. data is any callable on
    complex arrays; mode fixes how it is interpreted."""

    targets: tuple
    epsilon: float
    mode: str = "additive"

    def __post_init__(self):
        if self.mode not in ("additive", "multiplicative-log", "harmonic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        targets = tuple((K, as_sampled(h)) for K, h in self.targets)
        if not targets:
            raise ValueError("need at least one target")
        object.__setattr__(self, "targets", targets)
        regions = [K for K, _ in targets]
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                if regions[i].intersects(regions[j]):
                    raise ValueError(
                        f"target regions {i} and {j} are not disjoint")
        centers = np.concatenate([K.centers for K in regions])
        radii = np.concatenate([K.radii for K in regions])
        union = CompactRegion(centers, radii, check_connected=False)
        if not union.complement_connected():
            raise ValueError("complement of the target union is disconnected")

    @property
    def regions(self):
        return tuple(K for K, _ in self.targets)


@dataclass(frozen=True)
class RungeCertificate:
    """Approximant plus per-target errors re-measured at a finer sampling
    than the fit used; every error is below the problem's epsilon."""

    problem: RungeProblem
    mode: str
    degree: int
    poly: ComplexPoly
    approximant: SampledFunction
    errors: tuple
    density: float

    @property
    def epsilon(self):
        return self.problem.epsilon

    @property
    def max_error(self):
        return max(self.errors)


# ---------------------------------------------------------------------------
# framing and fitting


def _frame(targets, sample_sets):
    """Covariant frame: first anchor plus the quantized mean anchor offset,
    scaled by the sample spread. Built from difference vectors only."""
    anchors = [K.anchor for K, _ in targets]
    base = anchors[0]
    offset = q26(complex(np.mean([a - base for a in anchors])))
    z0 = base + offset
    spread = max(float(np.max(np.abs(pts - z0))) for pts in sample_sets)
    return z0, max(spread, 1e-9)


def _vandermonde(pts, z0, scale, degree):
    u = (pts - z0) / scale
    return np.vander(u, degree + 1, increasing=True)


def _degrees(degree, cap):
    if degree is not None:
        return [int(degree)]
    ladder = [d for d in DEGREE_LADDER if d < cap]
    ladder.append(cap)
    return ladder


def _certify(problem, mode, deg, poly, approximant, errors, density):
    return RungeCertificate(problem=problem, mode=mode, degree=deg, poly=poly,
                            approximant=approximant, errors=tuple(errors),
                            density=density)


def _tame_points(tame_region, density):
    if tame_region is None:
        return None
    return tame_region.boundary_samples(density)


def solve_additive(problem: RungeProblem, degree_cap=DEFAULT_CAP, density=64,
                   degree=None, tame_region=None,
                   tame_weight=TAME_WEIGHT) -> RungeCertificate:
    """Fit one polynomial to all targets' values jointly; escalate the degree
    until every per-target boundary sup error at doubled sampling density is
    below epsilon. Raises DegreeCapExceeded with the best error otherwise.

    tame_region, when given, adds soft rows at weight tame_weight on that
    region's boundary, with the mean of the target data as their value. The
    fit error is still measured on the targets alone; the soft rows only
    pick, among near-minimizers, one that stays plateau-flat on the tame
    region. Callers that feed one level's approximant into the next level's
    data use this to keep values tame on the territory sampled next."""
    if problem.mode != "additive":
        raise ValueError("solve_additive needs mode='additive'")
    fit_sets = [K.boundary_samples(density) for K, _ in problem.targets]
    fit_vals = [h(pts) for (K, h), pts in zip(problem.targets, fit_sets)]
    check_sets = [K.boundary_samples(2 * density) for K, _ in problem.targets]
    check_vals = [h(pts) for (K, h), pts in zip(problem.targets, check_sets)]
    return _solve_on_samples(problem, "additive", fit_sets, fit_vals,
                             check_sets, check_vals, degree_cap, density,
                             degree, _tame_points(tame_region, density),
                             tame_weight)


def _solve_on_samples(problem, mode, fit_sets, fit_vals, check_sets,
                      check_vals, degree_cap, density, degree, tame_pts,
                      tame_weight):
    for vals in fit_vals + check_vals:
        if not np.all(np.isfinite(vals)):
            raise ValueError("target data is not finite on its region")
    spread_sets = fit_sets if tame_pts is None else fit_sets + [tame_pts]
    z0, scale = _frame(problem.targets, spread_sets)
    pts = np.concatenate(fit_sets)
    rhs = np.concatenate(fit_vals)
    if tame_pts is not None:
        flat = np.full(len(tame_pts), np.mean(rhs), dtype=rhs.dtype)
        rhs = np.concatenate([rhs, tame_weight * flat])
    best = math.inf
    for deg in _degrees(degree, degree_cap):
        A = _vandermonde(pts, z0, scale, deg)
        if tame_pts is not None:
            T = _vandermonde(tame_pts, z0, scale, deg)
            A = np.concatenate([A, tame_weight * T])
        col = np.max(np.abs(A), axis=0)
        col[col == 0] = 1.0
        coeffs, *_ = np.linalg.lstsq(A / col, rhs, rcond=RCOND)
        coeffs = coeffs / col
        poly = ComplexPoly(tuple(coeffs.tolist()), center=z0, scale=scale)
        errors = [float(np.max(np.abs(poly(cp) - cv)))
                  for cp, cv in zip(check_sets, check_vals)]
        best = min(best, max(errors))
        if max(errors) < problem.epsilon:
            return _certify(problem, mode, deg, poly, poly.as_sampled(),
                            errors, 2 * density)
    raise DegreeCapExceeded(
        f"degree cap {degree_cap} reached with error {best:.3e} "
        f"(epsilon {problem.epsilon:.3e})",
        cap=degree_cap, best_error=best)


# ---------------------------------------------------------------------------
# multiplicative mode: branch-consistent logarithms, then the additive engine


def _branch_log(K: CompactRegion, h, density):
    """log h on K's boundary samples with one consistent branch per region.

    Data carrying a declared log (h.log_eval) is sampled through it directly:
    a declared log is already a branch, and it stays finite where the plain
    values would overflow. Otherwise the imaginary part is assigned along a
    spanning tree whose edges are shorter than min radius / 4; every
    remaining short edge is then checked for cycle consistency, and a winding
    defect of pi or more raises BranchInconsistency."""
    for z in tuple(getattr(h, "zeros", ())) + tuple(getattr(h, "singularities", ())):
        if K.contains(z):
            raise ZeroInK(f"declared zero or singularity {z} lies in a target")
    log_eval = getattr(h, "log_eval", None)
    if log_eval is not None:
        pts = K.boundary_samples(density)
        logs = np.asarray(log_eval(pts), dtype=complex)
        if not np.all(np.isfinite(logs)):
            raise ZeroInK("declared log is not finite on a target region")
        return pts, logs
    for attempt in range(2):
        pts = K.boundary_samples(density * (2 ** attempt))
        vals = h(pts)
        if np.any(~np.isfinite(vals)) or np.any(vals == 0):
            raise ZeroInK("data vanishes or blows up on a target region")
        thresh = K.min_radius() / 4
        tree = cKDTree(np.column_stack([pts.real, pts.imag]))
        pairs = tree.query_pairs(thresh, output_type="ndarray")
        if len(pairs) == 0 and len(pts) > 1:
            continue
        adj = [[] for _ in pts]
        for i, j in pairs:
            adj[i].append(j)
            adj[j].append(i)
        theta = np.full(len(pts), np.nan)
        raw = np.angle(vals)
        theta[0] = raw[0]
        stack = [0]
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if np.isnan(theta[j]):
                    step = raw[j] - raw[i]
                    step -= 2 * math.pi * round(step / (2 * math.pi))
                    theta[j] = theta[i] + step
                    stack.append(j)
        if np.any(np.isnan(theta)):
            continue  # sampling too sparse to connect; retry denser
        # cycle consistency across every short edge
        i, j = pairs[:, 0], pairs[:, 1]
        step = raw[j] - raw[i]
        step -= 2 * math.pi * np.round(step / (2 * math.pi))
        defect = np.abs(theta[j] - theta[i] - step)
        if np.any(defect >= math.pi):
            raise BranchInconsistency(
                f"winding defect {float(np.max(defect)):.3f} >= pi on a cycle")
        return pts, np.log(np.abs(vals)) + 1j * theta
    raise ValueError(
        "boundary sampling cannot connect the region for branch tracking")


def solve_multiplicative(problem: RungeProblem, degree_cap=DEFAULT_CAP,
                         density=64, degree=None, tame_region=None,
                         tame_weight=TAME_WEIGHT) -> RungeCertificate:
    """Zero-free patching: fit a polynomial to branch-consistent logs and
    return exp(poly). Errors are log-modulus seminorms of approximant / data,
    measured at doubled density. tame_region adds soft zero rows as in
    solve_additive.

    Each region's log branch is recentred by a multiple of 2 pi i toward the
    first region's mean imaginary part. exp is unchanged, and without the
    recentring per-region branch choices can sit whole turns apart, forcing
    spurious winding into the joint fit and starving the real part of
    accuracy."""
    if problem.mode != "multiplicative-log":
        raise ValueError("solve_multiplicative needs mode='multiplicative-log'")
    fit_sets, fit_vals = [], []
    ref = None
    for K, h in problem.targets:
        pts, logs = _branch_log(K, h, density)
        mean_im = float(np.mean(logs.imag))
        if ref is None:
            ref = mean_im
        k = round((mean_im - ref) / (2 * math.pi))
        fit_sets.append(pts)
        fit_vals.append(logs - 2j * math.pi * k)
    tame_pts = _tame_points(tame_region, density)
    spread_sets = fit_sets if tame_pts is None else fit_sets + [tame_pts]
    z0, scale = _frame(problem.targets, spread_sets)
    pts = np.concatenate(fit_sets)
    rhs = np.concatenate(fit_vals)
    if tame_pts is not None:
        flat = np.full(len(tame_pts), np.mean(rhs), dtype=complex)
        rhs = np.concatenate([rhs, tame_weight * flat])
    best = math.inf
    for deg in _degrees(degree, degree_cap):
        A = _vandermonde(pts, z0, scale, deg)
        if tame_pts is not None:
            T = _vandermonde(tame_pts, z0, scale, deg)
            A = np.concatenate([A, tame_weight * T])
        col = np.max(np.abs(A), axis=0)
        col[col == 0] = 1.0
        coeffs, *_ = np.linalg.lstsq(A / col, rhs, rcond=RCOND)
        coeffs = coeffs / col
        poly = ComplexPoly(tuple(coeffs.tolist()), center=z0, scale=scale)
        errors = []
        for K, h in problem.targets:
            cp = K.boundary_samples(2 * density)
            log_eval = getattr(h, "log_eval", None)
            if log_eval is not None:
                log_mod = np.real(np.asarray(log_eval(cp), dtype=complex))
                if not np.all(np.isfinite(log_mod)):
                    raise ZeroInK("declared log is not finite on a target region")
            else:
                hv = h(cp)
                if np.any(hv == 0) or np.any(~np.isfinite(hv)):
                    raise ZeroInK("data vanishes or blows up on a target region")
                log_mod = np.log(np.abs(hv))
            errors.append(float(np.max(np.abs(np.real(poly(cp)) - log_mod))))
        best = min(best, max(errors))
        if max(errors) < problem.epsilon:
            approximant = SampledFunction(
                evaluator=lambda z, _p=poly: np.exp(_p(z)),
                log_eval=poly,
                label=f"exp(degree-{deg} patch)")
            return _certify(problem, "multiplicative-log", deg, poly,
                            approximant, errors, 2 * density)
    raise DegreeCapExceeded(
        f"degree cap {degree_cap} reached with log error {best:.3e} "
        f"(epsilon {problem.epsilon:.3e})",
        cap=degree_cap, best_error=best)


# ---------------------------------------------------------------------------
# harmonic mode: real span of 1, Re z^k, Im z^k


def solve_harmonic(problem: RungeProblem, degree_cap=DEFAULT_CAP, density=64,
                   degree=None, tame_region=None,
                   tame_weight=TAME_WEIGHT) -> RungeCertificate:
    """Fit a real harmonic polynomial (the real part of a complex one) to
    real data on the targets. tame_region adds soft zero rows as in
    solve_additive."""
    if problem.mode != "harmonic":
        raise ValueError("solve_harmonic needs mode='harmonic'")
    fit_sets = [K.boundary_samples(density) for K, _ in problem.targets]
    fit_vals = [np.real(h(pts)) for (K, h), pts in zip(problem.targets, fit_sets)]
    check_sets = [K.boundary_samples(2 * density) for K, _ in problem.targets]
    check_vals = [np.real(h(pts)) for (K, h), pts in zip(problem.targets, check_sets)]
    for vals in fit_vals + check_vals:
        if not np.all(np.isfinite(vals)):
            raise ValueError("target data is not finite on its region")
    tame_pts = _tame_points(tame_region, density)
    spread_sets = fit_sets if tame_pts is None else fit_sets + [tame_pts]
    z0, scale = _frame(problem.targets, spread_sets)
    pts = np.concatenate(fit_sets)
    rhs = np.concatenate(fit_vals)
    if tame_pts is not None:
        flat = np.full(len(tame_pts), np.mean(rhs))
        rhs = np.concatenate([rhs, tame_weight * flat])
    best = math.inf
    for deg in _degrees(degree, degree_cap):
        V = _vandermonde(pts, z0, scale, deg)
        A = np.concatenate([V.real, V[:, 1:].imag], axis=1)
        if tame_pts is not None:
            TV = _vandermonde(tame_pts, z0, scale, deg)
            T = np.concatenate([TV.real, TV[:, 1:].imag], axis=1)
            A = np.concatenate([A, tame_weight * T])
        col = np.max(np.abs(A), axis=0)
        col[col == 0] = 1.0
        sol, *_ = np.linalg.lstsq(A / col, rhs, rcond=RCOND)
        sol = sol / col
        # pack Re(sum q_k u^k): q_0 = a_0, q_k = b_k - i c_k
        q = np.zeros(deg + 1, dtype=complex)
        q[0] = sol[0]
        q[1:] = sol[1:deg + 1] - 1j * sol[deg + 1:]
        poly = ComplexPoly(tuple(q.tolist()), center=z0, scale=scale)
        errors = [float(np.max(np.abs(np.real(poly(cp)) - cv)))
                  for cp, cv in zip(check_sets, check_vals)]
        best = min(best, max(errors))
        if max(errors) < problem.epsilon:
            approximant = SampledFunction(
                evaluator=lambda z, _p=poly: np.real(_p(z)) + 0j,
                label=f"harmonic degree-{deg} patch")
            return _certify(problem, "harmonic", deg, poly, approximant,
                            errors, 2 * density)
    raise DegreeCapExceeded(
        f"degree cap {degree_cap} reached with error {best:.3e} "
        f"(epsilon {problem.epsilon:.3e})",
        cap=degree_cap, best_error=best)


def solve(problem: RungeProblem, **kw) -> RungeCertificate:
    """Dispatch on the problem's mode."""
    if problem.mode == "additive":
        return solve_additive(problem, **kw)
    if problem.mode == "multiplicative-log":
        return solve_multiplicative(problem, **kw)
    return solve_harmonic(problem, **kw)
