"""Lattice Green kernels and the growth computations around them.

Two sides of one boundary. Solvable side: a rank-p lattice with
p <= d-2 admits a periodic Newton-kernel sum G with -Delta G = sum of
unit atoms on the lattice; its truncation defect decays and the
representation identity g = -int G (Delta g) holds for smooth periodic
test functions. Unsolvable side: once the stabilizer has rank d-1 the
atomic mass in a ball grows like t^{d-1} (so no upper-bounded potential
can carry it), and rank-d periodic subharmonic functions are constant
(the box flux identity). In between sit 1-periodic entire functions,
which anchor canonically through their line maxima M_f.

All sums and probes here are deterministic: lattice shells are paired
(y, -y) and reduced in one fixed order, grids are fixed by node counts.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConstantInput, OnLattice, PolesTooClose,
                     RangeInsufficient)

BALL_VOLUME = {3: 4.0 * math.pi / 3.0, 4: math.pi ** 2 / 2.0}


def sphere_area(d):
    """Surface measure of the unit sphere in R^d."""
    return d * BALL_VOLUME[d]


# ---------------------------------------------------------------------------
# lattice Green kernel


@dataclass(frozen=True)
class LatticeGreen:
    """Truncated periodic Newton-kernel sum for a rank-p lattice, p <= d-2.

    generators: p independent vectors in R^d (rows). R: truncation radius
    for the lattice sum. The kernel is normalized so each atom carries
    unit Laplacian mass: G(x) ~ |x|^{2-d} / ((d-2) * sphere_area(d)) near
    an atom; the sphere-average probe in the tests certifies the constant.
    """

    generators: tuple
    R: float
    d: int = 3
    allow_d4: bool = False
    _pairs: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.d not in (3, 4):
            raise ValueError("dimension must be 3 or 4")
        if self.d == 4 and not self.allow_d4:
            raise ValueError("d=4 sums are slow; pass allow_d4=True")
        gens = tuple(tuple(float(c) for c in g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        A = self.matrix()
        p = A.shape[0]
        if not 1 <= p <= self.d - 2:
            raise ValueError(f"lattice rank {p} outside [1, {self.d - 2}]")
        if any(len(g) != self.d for g in gens):
            raise ValueError("generator length must match the dimension")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-9 * sv[0]:
            raise ValueError("generators are not independent")
        if self.R < 10.0 * self.covering_radius():
            raise ValueError("truncation radius below 10x covering radius")

    def matrix(self):
        return np.array(self.generators, dtype=float)

    def covering_radius(self):
        """Upper bound for the covering radius within the lattice span."""
        return 0.5 * sum(float(np.linalg.norm(g)) for g in self.generators)

    def to_json(self):
        return {"generators": [list(g) for g in self.generators],
                "R": self.R, "d": self.d}

    @staticmethod
    def from_json(obj):
        return LatticeGreen(tuple(tuple(g) for g in obj["generators"]),
                            R=float(obj["R"]), d=int(obj["d"]),
                            allow_d4=int(obj["d"]) == 4)

    # -- lattice enumeration

    def lattice_points(self, radius):
        """All lattice vectors with |y| <= radius, the origin included."""
        A = self.matrix()
        p = A.shape[0]
        K = int(math.ceil(radius * float(np.linalg.norm(np.linalg.pinv(A),
                                                        ord=2)))) + 1
        axes = [np.arange(-K, K + 1)] * p
        ks = np.stack(np.meshgrid(*axes, indexing="ij"),
                      axis=-1).reshape(-1, p)
        pts = ks @ A
        keep = np.einsum("ij,ij->i", pts, pts) <= radius * radius + 1e-12
        return pts[keep]

    def pair_representatives(self, radius):
        """One vector of each nonzero (y, -y) pair with |y| <= radius,
        sorted by decreasing |y| (far shells accumulate first, so the tiny
        paired terms are summed before the O(1) near terms)."""
        key = float(radius)
        if key not in self._pairs:
            pts = self.lattice_points(radius)
            norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
            pts, norms = pts[norms > 1e-12], norms[norms > 1e-12]
            # canonical half: first coordinate of meaningful size decides
            sign = np.zeros(len(pts))
            for j in range(pts.shape[1]):
                undecided = sign == 0
                col = pts[undecided, j]
                sign[undecided] = np.sign(col) * (np.abs(col) > 1e-12)
            pts, norms = pts[sign > 0], norms[sign > 0]
            order = np.lexsort(tuple(pts[:, j] for j in range(pts.shape[1]))
                               + (-norms,))
            self._pairs[key] = (pts[order], norms[order])
        return self._pairs[key]

    def nearest_lattice_distance(self, x):
        x = np.asarray(x, dtype=float)
        A = self.matrix()
        k0 = np.rint(np.linalg.pinv(A).T @ x)
        p = A.shape[0]
        offs = np.stack(np.meshgrid(*([np.arange(-1, 2)] * p),
                                    indexing="ij"), axis=-1).reshape(-1, p)
        cand = (k0[None, :] + offs) @ A
        return float(np.min(np.linalg.norm(cand - x[None, :], axis=1)))


def _f_values(g: LatticeGreen, X):
    """The shifted Newton-kernel series at rows of X, truncated at g.R:
    |x|^{2-d} + sum over pairs [(|x-y|^{2-d} - |y|^{2-d})
                              + (|x+y|^{2-d} - |y|^{2-d})]."""
    X = np.asarray(X, dtype=float)
    ys, norms = g.pair_representatives(g.R)
    e = 2 - g.d
    out = np.linalg.norm(X, axis=-1) ** e
    if len(ys) == 0:
        return out
    step = max(1, int(2e6 // max(1, len(ys))))
    for i in range(0, X.shape[0], step):
        blk = X[i:i + step]
        dm = np.linalg.norm(blk[:, None, :] - ys[None, :, :], axis=-1) ** e
        dp = np.linalg.norm(blk[:, None, :] + ys[None, :, :], axis=-1) ** e
        out[i:i + step] += np.add.reduce(dm + dp - 2.0 * norms[None, :] ** e,
                                         axis=1)
    return out


def green_eval(g: LatticeGreen, x):
    """Truncated G(x) and a tail estimate for the discarded shells.

    The estimate uses the unpaired first-order term bound (d-2)|x| r^{1-d}
    times the measured shell density, integrated past R: the O(R^{p-(d-1)})
    rate. The paired sum actually computed decays one power faster, so the
    reported tail is conservative.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (g.d,):
        raise ValueError(f"point must have shape ({g.d},)")
    if g.nearest_lattice_distance(x) < 1e-9:
        raise OnLattice(f"{tuple(x)} lies on the lattice")
    r = float(np.linalg.norm(x))
    if g.R <= 2.0 * r:
        raise ValueError("truncation radius must dominate |x|")
    val = float(_f_values(g, x[None, :])[0]) / ((g.d - 2) * sphere_area(g.d))
    ys, norms = g.pair_representatives(g.R)
    p = g.matrix().shape[0]
    half = norms <= g.R / 2
    density = 2.0 * max(1, int(np.sum(~half))) / (g.R / 2)
    tail = (density * (g.d - 2) * max(r, 1e-6)
            * (g.R - r) ** (p - g.d + 1) / (g.d - 1 - p))
    return val, tail / ((g.d - 2) * sphere_area(g.d))


def green_periodicity_check(g: LatticeGreen, x, a):
    """|G(x+a) - G(x)| at the common truncation g.R. Tends to 0 with R for
    lattice shifts a; stays bounded away from 0 otherwise (stab = lattice)."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    va, _ = green_eval(g, x + a)
    vb, _ = green_eval(g, x)
    return abs(va - vb)


def periodic_representation_check(g: LatticeGreen, phi, lap_phi, support,
                                  h=1.0 / 32.0, probes=None):
    """Residual of g(x) = -int_{D0} G(x-y) (Delta g)(y) dy on probe points.

    phi, lap_phi: callables on (n, d) arrays, Gamma-periodic with support
    meeting the fundamental domain in a compact set covered by the axis
    box `support` = (lo, hi). Midpoint quadrature at pitch h; the Newton
    singularity is integrable, so cells near a probe contribute O(h^2).
    """
    lo = np.asarray(support[0], dtype=float)
    hi = np.asarray(support[1], dtype=float)
    # pitch is honored exactly; the box grows by up to one cell, which must
    # stay inside D0 (the integrand vanishes on the overhang)
    counts = np.maximum(1, np.ceil((hi - lo) / h - 1e-9).astype(int))
    axes = [lo[j] + (np.arange(counts[j]) + 0.5) * h for j in range(g.d)]
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.d)
    weight = float(h ** g.d)
    lap = np.asarray(lap_phi(Y), dtype=float)
    live = np.abs(lap) > 0
    Y, lap = Y[live], lap[live]
    if probes is None:
        probes = [0.5 * (lo + hi)]
    norm = (g.d - 2) * sphere_area(g.d)
    # cells near a probe are refined 4x: the midpoint rule's error there is
    # set by the Newton singularity and its alignment with the grid, which
    # otherwise drowns the smooth-region O(h^2) rate
    sub = np.stack(np.meshgrid(*([(np.arange(4) + 0.5) / 4.0 - 0.5] * g.d),
                               indexing="ij"), axis=-1).reshape(-1, g.d) * h
    worst = 0.0
    for x in probes:
        x = np.asarray(x, dtype=float)
        rhs = 0.0
        if len(Y):
            dist = np.linalg.norm(Y - x[None, :], axis=1)
            near = dist < 2.5 * h
            G = _f_values(g, x[None, :] - Y[~near]) / norm
            rhs = -float(np.sum(G * lap[~near])) * weight
            for yc in Y[near]:
                pts = yc[None, :] + sub
                d2 = np.linalg.norm(pts - x[None, :], axis=1)
                if float(np.min(d2)) < 1e-12:
                    raise ValueError("probe collides with a quadrature node")
                Gs = _f_values(g, x[None, :] - pts) / norm
                ls = np.asarray(lap_phi(pts), dtype=float)
                rhs -= float(np.sum(Gs * ls)) * weight / 4.0 ** g.d
        want = float(np.asarray(phi(x[None, :]), dtype=float)[0])
        worst = max(worst, abs(want - rhs))
    return worst


def sphere_average(fn, center, radius, n_polar=16):
    """Surface average of fn over the sphere |x - center| = radius in R^3,
    Gauss-Legendre in the polar cosine times a uniform azimuth grid."""
    center = np.asarray(center, dtype=float)
    mu, w = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(2 * n_polar) / (2 * n_polar)
    s = np.sqrt(1.0 - mu ** 2)
    dirs = np.stack([
        np.outer(s, np.cos(phi)),
        np.outer(s, np.sin(phi)),
        np.broadcast_to(mu[:, None], (n_polar, 2 * n_polar)),
    ], axis=-1).reshape(-1, 3)
    vals = np.array([fn(center + radius * v) for v in dirs], dtype=float)
    wts = np.repeat(w, 2 * n_polar) / (2.0 * np.sum(w) * n_polar)
    return float(np.sum(vals * wts))


# ---------------------------------------------------------------------------
# 1-periodic entire functions: growth probes and the canonical anchor


@dataclass(frozen=True)
class PeriodicEntire:
    """A 1-periodic function given by its evaluator, with a certification
    tolerance for the period."""

    evaluator: object
    label: str = ""
    period_tol: float = 1e-9

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=complex))

    def certify_period(self, samples=48):
        """max |f(z+1) - f(z)| over a fixed low-discrepancy probe set."""
        j = np.arange(samples)
        z = (j * 0.6180339887498949) % 1.0 + 1j * (-2.0 + 4.0 * ((j * 0.3819660112501051) % 1.0))
        return float(np.max(np.abs(self(z + 1.0) - self(z))))


@dataclass(frozen=True)
class GrowthProbe:
    """Sampled line maxima M_f(s) = max_t |f(t + i s)| over an s grid."""

    s: tuple
    M: tuple

    def min_threshold(self):
        """Smallest positive integer k whose sublevel set {M <= k} is
        nonempty on the probed range."""
        return max(1, int(math.ceil(min(self.M) - 1e-12)))

    def level_set(self, k):
        """Boolean mask of the probed sublevel set {s : M(s) <= k}."""
        return np.asarray(self.M) <= k


def _line_max(f, s, t_nodes):
    t = np.arange(t_nodes) / t_nodes
    return float(np.max(np.abs(f(t + 1j * s))))


def growth_probe(f, s_range=(-4.0, 4.0), s_nodes=257, t_nodes=256):
    s = np.linspace(s_range[0], s_range[1], s_nodes)
    M = [_line_max(f, float(sv), t_nodes) for sv in s]
    return GrowthProbe(s=tuple(float(v) for v in s),
                       M=tuple(float(v) for v in M))


@dataclass(frozen=True)
class Anchor:
    k: int
    s0: float
    side: str           # "smallest" | "largest"
    M_anchor: float
    probe: GrowthProbe


def canonical_anchor(f, s_range=(-4.0, 4.0), s_nodes=257, t_nodes=256):
    """Deterministic anchor of a nonconstant 1-periodic entire function.

    k: smallest integer threshold with nonempty sublevel set W on the
    probed range; s0: the smallest element of W when W is bounded below,
    else the largest (a fixed choice between the two admissible ends);
    endpoint crossovers are refined by bisection on M(s) = k. Raises
    ConstantInput when M does not vary, RangeInsufficient when W touches
    both probe boundaries or no growth shows at either end.
    """
    probe = growth_probe(f, s_range, s_nodes, t_nodes)
    M = np.asarray(probe.M)
    s = np.asarray(probe.s)
    if float(np.max(M) - np.min(M)) <= 1e-9 * (1.0 + float(np.max(M))):
        raise ConstantInput("line maxima are constant over the probe range")
    k = probe.min_threshold()
    mask = probe.level_set(k)
    if mask[0] and mask[-1]:
        raise RangeInsufficient(
            "sublevel set spans the whole probed range; widen it")

    def refine(lo, hi):
        # M(lo) > k >= M(hi) or the reverse; keep the <= end moving
        flo = _line_max(f, lo, t_nodes) <= k
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if (_line_max(f, mid, t_nodes) <= k) == flo:
                lo = mid
            else:
                hi = mid
        return hi if flo else lo

    idx = np.nonzero(mask)[0]
    if mask[0]:
        side = "largest"
        last = int(idx[-1])
        s0 = float(s[last]) if last == len(s) - 1 else refine(
            float(s[last + 1]), float(s[last]))
    else:
        side = "smallest"
        first = int(idx[0])
        s0 = float(s[first]) if first == 0 else refine(
            float(s[first - 1]), float(s[first]))
    M_anchor = _line_max(f, s0, t_nodes)
    if max(M[0], M[-1]) < 10.0 * max(M_anchor, 1e-300):
        raise RangeInsufficient(
            "no tenfold growth at either probe end; widen the range")
    return Anchor(k=k, s0=s0, side=side, M_anchor=M_anchor, probe=probe)


# ---------------------------------------------------------------------------
# Yosida-type products


def yosida_factor(a, b, z):
    """exp(pi i (b-a)) * sin(pi(z-a)) / sin(pi(z-b)).

    Normalized so the factor tends to 1 as Im z -> +infinity; on the other
    side it tends to a unimodular constant, so the modulus is 1 + O(e^{-2pi|y|})
    both ways. No constant prefactor can normalize both phases at once
    unless a = b, so one side is a fixed choice.
    """
    z = np.asarray(z, dtype=complex)
    return (np.exp(1j * math.pi * (b - a))
            * np.sin(math.pi * (z - a)) / np.sin(math.pi * (z - b)))


def yosida_product(pairs, separation=0.05):
    """Partial product F_N(z) = prod_{|k| <= N} S_{a_k, b_k}(z - i k) from
    2N+1 zero/pole pairs, the middle entry at k = 0. 1-periodic exactly by
    construction. Raises PolesTooClose below the required separation."""
    pairs = tuple((float(a), float(b)) for a, b in pairs)
    if len(pairs) % 2 != 1:
        raise ValueError("need an odd number of pairs, centered at k = 0")
    if separation <= 0:
        raise ValueError("separation must be positive")
    N = len(pairs) // 2
    for a, b in pairs:
        if abs(a - b) < separation:
            raise PolesTooClose(f"|{a} - {b}| < {separation}")

    def evaluator(z):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for i, (a, b) in enumerate(pairs):
            out = out * yosida_factor(a, b, z - 1j * (i - N))
        return out

    return PeriodicEntire(evaluator=evaluator, label=f"yosida N={N}")


def yosida_normality_table(F, j_values, re_nodes=41, im_nodes=7):
    """sup |F| over |Re z| <= 1, |Im z - j| <= 0.3 for each translate j:
    the sampled face of normality (no translate blows up)."""
    x = np.linspace(-1.0, 1.0, re_nodes)
    dy = np.linspace(-0.3, 0.3, im_nodes)
    rows = []
    for j in j_values:
        z = x[:, None] + 1j * (float(j) + dy[None, :])
        rows.append({"j": float(j), "sup": float(np.max(np.abs(F(z))))})
    return rows


# ---------------------------------------------------------------------------
# strip maximum principle


def strip_max_principle_check(f, s, t, bound, re_halfwidth=6.0,
                              grid_nodes=161, quad_nodes=64):
    """Sampled interior maximum against a boundary bound, plus a Cauchy
    reconstruction residual that detects non-holomorphic input.

    The rectangle contour for the Cauchy probe sits in the middle half of
    the strip with |Re z| <= 1; Gauss-Legendre per side. passed requires
    both interior_max <= bound + 1e-9 and a residual below 1e-8.
    """
    if not s < t:
        raise ValueError("strip needs s < t")
    x = np.linspace(-re_halfwidth, re_halfwidth, grid_nodes)
    y = s + (t - s) * (np.arange(1, grid_nodes) - 0.5) / (grid_nodes - 1)
    vals = np.abs(f(x[:, None] + 1j * y[None, :]))
    interior_max = float(np.max(vals))
    q = 0.25 * (t - s)
    z0 = complex(0.0, 0.5 * (s + t))
    corners = [complex(-1.0, s + q), complex(1.0, s + q),
               complex(1.0, t - q), complex(-1.0, t - q)]
    nodes, weights = np.polynomial.legendre.leggauss(quad_nodes)
    total = 0j
    for i in range(4):
        za, zb = corners[i], corners[(i + 1) % 4]
        mid, half = 0.5 * (za + zb), 0.5 * (zb - za)
        zeta = mid + half * nodes
        total += half * np.sum(weights * f(zeta) / (zeta - z0))
    recon = total / (2j * math.pi)
    fz0 = complex(np.asarray(f(np.array([z0], dtype=complex)))[0])
    residual = abs(recon - fz0) / (1.0 + abs(fz0))
    holomorphic = bool(residual < 1e-8)
    return {
        "interior_max": interior_max,
        "bound": float(bound),
        "bound_ok": bool(interior_max <= bound + 1e-9),
        "cauchy_residual": float(residual),
        "holomorphic": holomorphic,
        "passed": bool(interior_max <= bound + 1e-9 and holomorphic),
    }


# ---------------------------------------------------------------------------
# rank d-1: mass growth; rank d: rigidity


def ball_lattice_count(t):
    """Number of points of Z^2 x {0} in the closed ball of radius t."""
    m = int(math.floor(t))
    k = np.arange(-m, m + 1)
    return int(np.count_nonzero(
        (k[:, None] ** 2 + k[None, :] ** 2) <= t * t + 1e-9))


def riesz_growth_demo(t_min=5.0, t_max=40.0, step=0.1):
    """Mass growth table for unit atoms on Z^2 x {0} in R^3.

    Rows: t, mass mu(B(0,t)), ratio mass/t^2, and the running lower
    Riemann sum of int mass/t^2 dt from t_min (left mass over right
    squared radius per cell, an honest lower bound). The ratio stays
    above pi + o(1); the partial integral grows linearly, which is the
    numeric face of the incompatibility with any upper-bounded potential.
    """
    n = int(round((t_max - t_min) / step))
    ts = t_min + step * np.arange(n + 1)
    m = int(math.floor(t_max))
    k = np.arange(-m, m + 1)
    radii2 = np.sort((k[:, None] ** 2 + k[None, :] ** 2).reshape(-1))
    masses = np.searchsorted(radii2, ts * ts + 1e-9, side="right")
    rows = []
    partial = 0.0
    for i, t in enumerate(ts):
        if i > 0:
            partial += step * float(masses[i - 1]) / float(ts[i]) ** 2
        rows.append({"t": float(t), "mass": int(masses[i]),
                     "ratio": float(masses[i]) / float(t) ** 2,
                     "partial_integral": partial})
    return rows


def random_trig_poly(seed=0, degree=2, d=3, terms=6):
    """A random real trigonometric polynomial on the unit torus, returned
    with its gradient and Laplacian (closures on (n, d) arrays)."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    ks = []
    while len(ks) < terms:
        k = rng.integers(-degree, degree + 1, size=d)
        if np.any(k != 0):
            ks.append(k)
    ks = np.array(ks, dtype=float)
    amps = rng.normal(size=terms)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=terms)

    def u(x):
        x = np.asarray(x, dtype=float)
        arg = 2.0 * np.pi * (x @ ks.T) + phases
        return np.cos(arg) @ amps

    def grad_u(x):
        x = np.asarray(x, dtype=float)
        arg = 2.0 * np.pi * (x @ ks.T) + phases
        return -(np.sin(arg) * amps) @ (2.0 * np.pi * ks)

    def lap_u(x):
        x = np.asarray(x, dtype=float)
        arg = 2.0 * np.pi * (x @ ks.T) + phases
        w = (2.0 * np.pi) ** 2 * np.einsum("ij,ij->i", ks, ks)
        return -(np.cos(arg) * (amps * w)).sum(axis=-1)

    return u, grad_u, lap_u


def full_dim_rigidity_demo(u, grad_u, lap_u, n=24, d=3):
    """Green-identity residual on the unit torus box for a smooth periodic
    u: the volume integral of Delta u and the boundary flux of grad u both
    vanish (opposite faces carry equal integrands with reversed normals).
    Periodic trapezoid quadrature, exact for trigonometric polynomials of
    degree below n."""
    axes = [np.arange(n) / n] * d
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    volume = float(np.mean(np.asarray(lap_u(X), dtype=float)))
    face_axes = [np.arange(n) / n] * (d - 1)
    F = np.stack(np.meshgrid(*face_axes, indexing="ij"),
                 axis=-1).reshape(-1, d - 1)
    flux = 0.0
    for k in range(d):
        for side, sgn in ((0.0, -1.0), (1.0, 1.0)):
            pts = np.insert(F, k, side, axis=1)
            gk = np.asarray(grad_u(pts), dtype=float)[:, k]
            flux += sgn * float(np.mean(gk))
    residual = max(abs(volume), abs(flux))
    return {"volume_integral": volume, "flux": flux, "residual": residual}
