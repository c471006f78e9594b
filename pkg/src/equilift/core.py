"""Complex-plane numerics: disk-union geometry, seminorms, contour quadrature,
zero localization.

Conventions that the rest of the toolkit relies on:

* All geometric data (disk centers, radii, sample offsets) is quantized to the
  dyadic lattice 2**-26 * (Z + iZ) by ``q26``. Sums and differences of
  quantized values of moderate size are exact in float64, so translating a
  region by a quantized shift translates every derived sample point exactly.
  That is what makes the shift-covariance guarantees of the higher modules
  hold to the last bit rather than to a tolerance.
* Sample sets are deterministic functions of the disk list: per-circle
  equiangular boundary points plus a hexagonal interior lattice anchored at
  the first disk center.
* Functions are wrapped in ``SampledFunction``: a vectorized evaluator plus
  optional analytic derivative / logarithmic derivative / log-scale evaluator
  closures. Operations prefer the analytic closures and fall back to central
  differences only for foreign evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ContourThroughZero,
    NoConvergence,
    SingularityInK,
    ZeroInK,
)

_Q = 2.0 ** 26


def q26(z):
    """Round to the 2**-26 lattice. Exact representation for |z| < 2**26."""
    if isinstance(z, np.ndarray):
        if np.iscomplexobj(z):
            return (np.round(z.real * _Q) + 1j * np.round(z.imag * _Q)) / _Q
        return np.round(z * _Q) / _Q
    if isinstance(z, complex):
        return complex(round(z.real * _Q) / _Q, round(z.imag * _Q) / _Q)
    return round(float(z) * _Q) / _Q


def q26_trunc(z):
    """Quantize toward zero: |q26_trunc(z)| <= |z| componentwise, so circle
    offsets stay inside the closed disk they were drawn from."""
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return (np.trunc(z.real * _Q) + 1j * np.trunc(z.imag * _Q)) / _Q
    return np.trunc(z * _Q) / _Q


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Window:
    """Axis-aligned closed rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("window must satisfy xmin < xmax and ymin < ymax")

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def center(self):
        return complex((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    @property
    def diameter(self):
        return math.hypot(self.width, self.height)

    @property
    def area(self):
        return self.width * self.height

    def inner(self, margin=0.15):
        """Shrink by `margin` of each side length, per side."""
        dx = margin * self.width
        dy = margin * self.height
        return Window(self.xmin + dx, self.xmax - dx, self.ymin + dy, self.ymax - dy)

    def contains(self, z, pad=0.0):
        x, y = np.real(z), np.imag(z)
        return (
            (x >= self.xmin - pad)
            & (x <= self.xmax + pad)
            & (y >= self.ymin - pad)
            & (y <= self.ymax + pad)
        )

    def translate(self, w):
        w = complex(w)
        return Window(self.xmin + w.real, self.xmax + w.real,
                      self.ymin + w.imag, self.ymax + w.imag)

    def grid(self, h):
        """Cell-center grid at resolution h, returned as a complex 2d array."""
        nx = max(2, int(math.ceil(self.width / h)))
        ny = max(2, int(math.ceil(self.height / h)))
        xs = self.xmin + (np.arange(nx) + 0.5) * (self.width / nx)
        ys = self.ymin + (np.arange(ny) + 0.5) * (self.height / ny)
        return xs[None, :] + 1j * ys[:, None]

    def as_list(self):
        return [self.xmin, self.xmax, self.ymin, self.ymax]

    @staticmethod
    def from_list(v):
        return Window(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float


class CompactRegion:
    """Finite union of closed disks with a connected intersection graph.

    Complement connectivity is a checked predicate (``complement_connected``),
    not a construction invariant: verifiers need to build violating fixtures.
    """

    def __init__(self, centers, radii, check_connected=True):
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if centers.shape != radii.shape or centers.ndim != 1 or len(centers) == 0:
            raise ValueError("centers and radii must be matching nonempty 1d arrays")
        if np.any(radii <= 0):
            raise ValueError("radii must be positive")
        self.centers = q26(centers)
        self.radii = q26(radii)
        self.centers.setflags(write=False)
        self.radii.setflags(write=False)
        if check_connected and not self._graph_connected():
            raise ValueError("disk union is not connected")
        self._sample_cache = {}

    # -- construction helpers

    @staticmethod
    def disk(center, radius):
        return CompactRegion([complex(center)], [float(radius)])

    @staticmethod
    def from_disks(disks, check_connected=True):
        cs = [complex(c) for c, _ in disks]
        rs = [float(r) for _, r in disks]
        return CompactRegion(cs, rs, check_connected=check_connected)

    def disks(self):
        return list(zip(self.centers.tolist(), self.radii.tolist()))

    def __len__(self):
        return len(self.centers)

    # -- basic geometry

    @property
    def anchor(self):
        """Deterministic reference point: the first disk center."""
        return complex(self.centers[0])

    def bounding_box(self):
        xs, ys = self.centers.real, self.centers.imag
        return Window(
            float(np.min(xs - self.radii)), float(np.max(xs + self.radii)),
            float(np.min(ys - self.radii)), float(np.max(ys + self.radii)),
        )

    def _graph_connected(self):
        n = len(self.centers)
        if n == 1:
            return True
        d = np.abs(self.centers[:, None] - self.centers[None, :])
        adj = d <= (self.radii[:, None] + self.radii[None, :])
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            nxt = np.nonzero(adj[i] & ~seen)[0]
            seen[nxt] = True
            stack.extend(nxt.tolist())
        return bool(seen.all())

    def contains(self, z, pad=0.0):
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        out = np.zeros(flat.shape, dtype=bool)
        # chunk so that the pairwise distance table stays small
        step = max(1, int(4e6 // max(1, len(self.centers))))
        for i in range(0, len(flat), step):
            blk = flat[i:i + step]
            d = np.abs(blk[:, None] - self.centers[None, :])
            out[i:i + step] = (d <= self.radii[None, :] + pad).any(axis=1)
        return out.reshape(z.shape) if z.shape else bool(out[0])

    def translate(self, w):
        """Translate by w. Exact when w is q26-quantized (the usual case)."""
        r = CompactRegion(self.centers + complex(w), self.radii, check_connected=False)
        return r

    def intersects(self, other):
        d = np.abs(self.centers[:, None] - other.centers[None, :])
        return bool((d <= self.radii[:, None] + other.radii[None, :]).any())

    def min_radius(self):
        return float(np.min(self.radii))

    # -- sampling (deterministic, covariant)

    def boundary_samples(self, density=64):
        """Equiangular points on every disk circle, offsets q26-quantized.

        All per-circle points are kept, including those interior to another
        disk: sample sets of disk-list extensions are then supersets, which
        makes seminorm monotonicity exact.
        """
        pts = []
        for c, r in zip(self.centers, self.radii):
            m = max(12, int(math.ceil(density * r)))
            theta = 2 * np.pi * np.arange(m) / m
            off = q26_trunc(r * np.exp(1j * theta))
            pts.append(c + off)
        return np.concatenate(pts)

    def interior_samples(self, density=64):
        """Hexagonal lattice clipped to the region, anchored at self.anchor."""
        delta = 2 * np.pi / density
        a = self.anchor
        bb = self.bounding_box()
        # enumerate rows/cols from anchor-relative extents (covariant)
        lo_x, hi_x = bb.xmin - a.real, bb.xmax - a.real
        lo_y, hi_y = bb.ymin - a.imag, bb.ymax - a.imag
        row_h = delta * math.sqrt(3) / 2
        j0, j1 = int(math.floor(lo_y / row_h)), int(math.ceil(hi_y / row_h))
        pts = []
        for j in range(j0, j1 + 1):
            y = j * row_h
            x_shift = 0.5 * delta if (j % 2) else 0.0
            i0 = int(math.floor((lo_x - x_shift) / delta))
            i1 = int(math.ceil((hi_x - x_shift) / delta))
            xs = (np.arange(i0, i1 + 1)) * delta + x_shift
            pts.append(q26(xs + 1j * y))
        rel = np.concatenate(pts)
        cand = a + rel
        return cand[self.contains(cand)]

    def samples(self, density=64):
        key = density
        if key not in self._sample_cache:
            self._sample_cache[key] = np.concatenate(
                [self.boundary_samples(density), self.interior_samples(density)]
            )
        return self._sample_cache[key]

    # -- topology checks

    def grid_resolution(self):
        """Pitch for grid-based estimates (area); topology checks are exact."""
        return self.min_radius() / 8

    def complement_connected(self):
        """Exact verdict: True iff the plane minus the disk union is connected.

        Resolution-free (see hole_witness): grid methods misjudge gaps
        narrower than their pitch, which real clustered data produces.
        """
        return hole_witness(self.centers, self.radii) is None

    def area(self, h=None):
        """Grid estimate of the union area (deterministic)."""
        if h is None:
            h = self.grid_resolution()
        bb = self.bounding_box()
        a = self.anchor
        i0 = int(math.floor((bb.xmin - a.real) / h))
        i1 = int(math.ceil((bb.xmax - a.real) / h))
        j0 = int(math.floor((bb.ymin - a.imag) / h))
        j1 = int(math.ceil((bb.ymax - a.imag) / h))
        xs = (np.arange(i0, i1 + 1) + 0.5) * h
        ys = (np.arange(j0, j1 + 1) + 0.5) * h
        zz = a + xs[None, :] + 1j * ys[:, None]
        return float(np.count_nonzero(self.contains(zz))) * h * h

    # -- containment

    def contained_in(self, other, margin=0.0, tol=1e-12):
        """True iff every disk of self is covered by `other` (radii shrunk by
        `margin`).

        Fast paths: identical disks, or a single covering disk. General case:
        angular arc coverage of each circle of self by the disks of other;
        together with connectedness of self and connectedness of the
        complement of other, boundary coverage implies containment.
        """
        oc, orr = other.centers, other.radii - margin
        for c, r in zip(self.centers, self.radii):
            d = np.abs(c - oc)
            if np.any(d + r <= orr + tol):
                continue  # fully inside one disk
            if not _circle_covered(c, r, oc, orr, tol):
                return False
        return True


def _gf2_echelon(mat):
    """Row echelon form over GF(2): (reduced rows, [(pivot col, row)]).

    Holes of planar compacts are torsion-free, so mod-2 ranks give the
    same Betti numbers as rational ones while staying exact in floats.
    """
    a = mat.copy()
    pivots = []
    rows = a.shape[0]
    rank = 0
    for col in range(a.shape[1]):
        hit = np.flatnonzero(a[rank:, col])
        if len(hit) == 0:
            continue
        piv = hit[0] + rank
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        others = a[:, col].astype(bool)
        others[rank] = False
        a[others] ^= a[rank]
        pivots.append((col, rank))
        rank += 1
        if rank == rows:
            break
    return a[:rank], pivots


def _gf2_in_rowspace(vec, ech, pivots):
    v = vec.copy()
    for col, row in pivots:
        if v[col]:
            v ^= ech[row]
    return not v.any()


def circle_crossings(c1, r1, c2, r2):
    """Crossing points of two circles; the radical-axis point (doubled) when
    tangent within rounding. Callers re-test membership, so spurious
    candidates from non-crossing circles are harmless."""
    d = abs(c2 - c1)
    if d == 0.0:
        return ()
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    u = (c2 - c1) / d
    base = c1 + a * u
    return (base + 1j * h * u, base - 1j * h * u)


def _disks_triple_meet(c1, r1, c2, r2, c3, r3, tol):
    """True iff three closed disks share a point.

    The common intersection is convex; if nonempty it contains a center or
    a pair-circle crossing point (a vertex of the intersection region, or a
    center when one disk sits inside the others), so testing those finitely
    many candidates is exact.
    """
    cand = [c1, c2, c3]
    cand += circle_crossings(c1, r1, c2, r2)
    cand += circle_crossings(c1, r1, c3, r3)
    cand += circle_crossings(c2, r2, c3, r3)
    for p in cand:
        if (abs(p - c1) <= r1 + tol and abs(p - c2) <= r2 + tol
                and abs(p - c3) <= r3 + tol):
            return True
    return False


def hole_witness(centers, radii):
    """Indices of disks ringing a complement pocket, or None if none exists.

    Disks are convex, so their union is homotopy equivalent to the nerve of
    the family (which only needs pairs and triples: a triple meet reduces to
    finitely many candidate points, and higher meets never affect first
    homology). A bounded complement component exists exactly when some
    1-cycle is not a mod-2 combination of triple-meet triangles; the witness
    returned is a shortest such fundamental cycle of the intersection graph,
    as a ring-ordered index tuple. Every decision uses pairwise differences
    only, so verdicts are exactly shift-covariant.
    """
    c = np.asarray(centers, dtype=complex)
    r = np.asarray(radii, dtype=float)
    n = len(c)
    if n <= 2:
        return None
    dist = np.abs(c[:, None] - c[None, :])
    tol = 1e-9 * max(1.0, float(np.max(r)), float(np.max(dist)))
    adj = dist <= r[:, None] + r[None, :] + tol
    np.fill_diagonal(adj, False)
    # leaf disks are collapsible in the nerve: 1-cycles live in the 2-core
    alive = np.ones(n, dtype=bool)
    while True:
        deg = (adj & alive[None, :]).sum(axis=1)
        drop = alive & (deg <= 1)
        if not drop.any():
            break
        alive[drop] = False
    verts = np.flatnonzero(alive)
    if len(verts) == 0:
        return None
    sub = adj[np.ix_(verts, verts)]
    m = len(verts)
    edges = [(i, j) for i in range(m) for j in range(i + 1, m) if sub[i, j]]
    d1 = np.zeros((len(edges), m), dtype=np.uint8)
    for k, (i, j) in enumerate(edges):
        d1[k, i] = 1
        d1[k, j] = 1
    cycles = len(edges) - len(_gf2_echelon(d1)[1])
    if cycles == 0:
        return None
    eidx = {e: k for k, e in enumerate(edges)}
    tri_rows = []
    for i, j in edges:
        for k in range(j + 1, m):
            if sub[i, k] and sub[j, k] and _disks_triple_meet(
                    c[verts[i]], r[verts[i]], c[verts[j]], r[verts[j]],
                    c[verts[k]], r[verts[k]], tol):
                row = np.zeros(len(edges), dtype=np.uint8)
                row[eidx[(i, j)]] = 1
                row[eidx[(i, k)]] = 1
                row[eidx[(j, k)]] = 1
                tri_rows.append(row)
    d2 = (np.array(tri_rows, dtype=np.uint8) if tri_rows
          else np.zeros((0, len(edges)), dtype=np.uint8))
    ech, pivots = _gf2_echelon(d2)
    if cycles == len(pivots):
        return None
    # some pocket exists; fundamental cycles span the cycle space, so at
    # least one of them lies outside the triangle row space
    neighbors = [np.flatnonzero(sub[i]).tolist() for i in range(m)]
    parent = [-1] * m
    depth = [0] * m
    seen = [False] * m
    order = []
    for root in range(m):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        while queue:
            u = queue.pop(0)
            order.append(u)
            for v in neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    depth[v] = depth[u] + 1
                    queue.append(v)
    tree = {(min(u, parent[u]), max(u, parent[u])) for u in range(m)
            if parent[u] >= 0}
    candidates = []
    for (u, v) in edges:
        if (u, v) in tree:
            continue
        pu, pv = u, v
        left, right = [u], [v]
        while depth[pu] > depth[pv]:
            pu = parent[pu]
            left.append(pu)
        while depth[pv] > depth[pu]:
            pv = parent[pv]
            right.append(pv)
        while pu != pv:
            pu = parent[pu]
            pv = parent[pv]
            left.append(pu)
            right.append(pv)
        ring = left + right[-2::-1]
        candidates.append(ring)
    candidates.sort(key=lambda ring: (len(ring), ring))
    for ring in candidates:
        vec = np.zeros(len(edges), dtype=np.uint8)
        for t in range(len(ring)):
            u, v = ring[t], ring[(t + 1) % len(ring)]
            vec[eidx[(min(u, v), max(u, v))]] = 1
        if not _gf2_in_rowspace(vec, ech, pivots):
            return tuple(int(verts[i]) for i in ring)
    raise AssertionError("cycle space not spanned by fundamental cycles")


def _circle_covered(c, r, centers, radii, tol):
    """Arc-coverage test: is the circle |z-c|=r inside union of closed disks?"""
    d = np.abs(centers - c)
    phi = np.angle(centers - c)
    # a disk covers the angular set { |theta - phi| <= psi } with
    # cos(psi) = (d^2 + r^2 - R^2) / (2 d r); degenerate cases first
    full = d + r <= radii + tol
    if np.any(full):
        return True
    ivals = []
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (d ** 2 + r ** 2 - radii ** 2) / (2 * d * r)
    for k in range(len(centers)):
        if radii[k] <= 0 or d[k] > r + radii[k]:
            continue
        tk = t[k]
        if tk >= 1.0:
            continue
        tk = max(tk, -1.0)
        psi = math.acos(tk)
        ivals.append((phi[k] - psi, phi[k] + psi))
    if not ivals:
        return False
    # normalize starts to [0, 2pi), keep widths, merge with wrap-around
    segs = sorted((a % (2 * math.pi), (a % (2 * math.pi)) + (b - a)) for a, b in ivals)
    unrolled = segs + [(a + 2 * math.pi, b + 2 * math.pi) for a, b in segs]
    slack = 1e-10
    cover_to = segs[0][0]
    target = segs[0][0] + 2 * math.pi
    for a, b in unrolled:
        if a > cover_to + slack:
            return False
        cover_to = max(cover_to, b)
        if cover_to >= target - slack:
            return True
    return False


# ---------------------------------------------------------------------------
# function wrapper


def _vectorize_eval(fn):
    def ev(z):
        z = np.asarray(z, dtype=complex)
        out = fn(z)
        return np.asarray(out, dtype=complex)
    return ev


@dataclass
class SampledFunction:
    """A function on a plane window: vectorized evaluator plus declared data.

    ``singularities``: points where the evaluator is not finite (poles).
    ``zeros``: declared zero locations (used to refuse log-seminorms fast).
    Optional closures: ``deriv`` (f'), ``dlog`` (f'/f), ``log_eval``
    (a value L with exp(L) = f, stable where |f| overflows).
    """

    evaluator: Callable
    window: Optional[Window] = None
    singularities: tuple = ()
    zeros: tuple = ()
    deriv: Optional[Callable] = None
    dlog: Optional[Callable] = None
    log_eval: Optional[Callable] = None
    label: str = ""

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            out = np.asarray(self.evaluator(z), dtype=complex)
        return out

    def derivative_at(self, z):
        """Analytic derivative when available, else central differences."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.deriv is not None:
                return np.asarray(self.deriv(z), dtype=complex)
            if self.dlog is not None:
                return np.asarray(self.dlog(z), dtype=complex) * self(z)
            h = 1e-6 * np.maximum(1.0, np.abs(z))
            return (self(z + h) - self(z - h)) / (2 * h)

    def dlog_at(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.dlog is not None:
                return np.asarray(self.dlog(z), dtype=complex)
            return self.derivative_at(z) / self(z)


def as_sampled(f) -> SampledFunction:
    if isinstance(f, SampledFunction):
        return f
    if callable(f):
        return SampledFunction(evaluator=_vectorize_eval(f))
    raise TypeError(f"cannot interpret {type(f)!r} as a function")


def constant(value) -> SampledFunction:
    v = complex(value)
    return SampledFunction(
        evaluator=lambda z: np.full(np.shape(z), v, dtype=complex),
        deriv=lambda z: np.zeros(np.shape(z), dtype=complex),
        label=f"const {v}",
    )


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class ComplexPoly:
    """Polynomial sum c_k * u^k with u = (z - center)/scale, ascending coeffs.

    center=0, scale=1 reads as a plain polynomial in z. The frame exists for
    conditioning: approximation engines fit in recentred/rescaled coordinates
    and the certificate keeps the frame rather than expanding it (expansion of
    a degree ~60 frame into raw monomials is numerically destructive).
    """

    coeffs: tuple
    center: complex = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "scale", float(self.scale))
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u = (z - self.center) / self.scale
        out = np.zeros_like(u)
        for c in reversed(self.coeffs):
            out = out * u + c
        return out

    def derivative(self):
        if len(self.coeffs) <= 1:
            return ComplexPoly((0.0,), self.center, self.scale)
        cs = [k * c / self.scale for k, c in enumerate(self.coeffs)][1:]
        return ComplexPoly(tuple(cs), self.center, self.scale)

    def trim(self, tol=0.0):
        cs = list(self.coeffs)
        while len(cs) > 1 and abs(cs[-1]) <= tol:
            cs.pop()
        return ComplexPoly(tuple(cs), self.center, self.scale)

    def add_constant(self, c):
        cs = list(self.coeffs)
        cs[0] += complex(c)
        return ComplexPoly(tuple(cs), self.center, self.scale)

    def as_sampled(self):
        d = self.derivative()
        return SampledFunction(evaluator=self.__call__, deriv=d.__call__,
                               label="poly")

    def to_json(self):
        return {
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
            "center": [self.center.real, self.center.imag],
            "scale": self.scale,
        }

    @staticmethod
    def from_json(d):
        return ComplexPoly(
            tuple(complex(a, b) for a, b in d["coeffs"]),
            complex(d["center"][0], d["center"][1]),
            d["scale"],
        )


# ---------------------------------------------------------------------------
# seminorms


def _check_declared(f: SampledFunction, K: CompactRegion):
    for s in f.singularities:
        if K.contains(complex(s)):
            raise SingularityInK(f"declared singularity {s} lies in K")


def sup_seminorm(f, K: CompactRegion, density=64) -> float:
    """max |f| over the deterministic sample set of K."""
    f = as_sampled(f)
    _check_declared(f, K)
    vals = np.abs(f(K.samples(density)))
    if not np.all(np.isfinite(vals)):
        raise SingularityInK("evaluator not finite on K")
    return float(np.max(vals))


def seminorm_slack(f, K: CompactRegion, density=64) -> float:
    """Crude modulus-of-continuity bound for the sampling gap of sup_seminorm:
    max |f'| over samples times half the sample spacing."""
    f = as_sampled(f)
    spacing = 2 * np.pi / density
    d = np.abs(f.derivative_at(K.samples(density)))
    return float(np.max(d) * spacing / 2)


def log_seminorm(f, K: CompactRegion, density=64) -> float:
    """sup |log |f|| over the sample set; f must be zero- and pole-free on K."""
    f = as_sampled(f)
    for s in tuple(f.singularities) + tuple(f.zeros):
        if K.contains(complex(s)):
            raise ZeroInK(f"declared zero/pole {s} lies in K")
    zs = K.samples(density)
    if f.log_eval is not None:
        re = np.real(np.asarray(f.log_eval(zs), dtype=complex))
        if not np.all(np.isfinite(re)):
            raise ZeroInK("log evaluator not finite on K")
        return float(np.max(np.abs(re)))
    vals = np.abs(f(zs))
    if not np.all(np.isfinite(vals)) or np.any(vals == 0.0):
        raise ZeroInK("f vanishes or blows up on K")
    return float(np.max(np.abs(np.log(vals))))


# ---------------------------------------------------------------------------
# contour quadrature


def contour_integral(f, circle: Circle, j=1, nodes=256) -> complex:
    """(1/2pi i) * contour integral of f(z) (z - center)^(j-1) dz over the
    circle, trapezoid rule (spectrally accurate for analytic integrands)."""
    f = as_sampled(f)
    c, r = complex(circle.center), float(circle.radius)
    theta = 2 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    z = c + r * e
    w = (r * e) ** (j - 1)
    vals = f(z) * w
    return complex(np.sum(vals * (r * e)) / nodes)


def _count_on_circle(f: SampledFunction, c, r, nodes):
    theta = 2 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    z = c + r * e
    g = f.dlog_at(z)
    if not np.all(np.isfinite(g)):
        raise ContourThroughZero("logarithmic derivative not finite on contour")
    val = np.sum(g * (r * e)) / nodes
    return val


def count_zeros(f, contour, nodes=512, return_residual=False):
    """Argument-principle count of zeros minus poles inside the contour.

    `contour` is a Circle or a Window (rectangle boundary). The pre-rounding
    residual must stay below 0.25, else ContourThroughZero.
    """
    f = as_sampled(f)
    if isinstance(contour, Circle):
        val = _count_on_circle(f, complex(contour.center), float(contour.radius), nodes)
    elif isinstance(contour, Window):
        corners = [
            complex(contour.xmin, contour.ymin),
            complex(contour.xmax, contour.ymin),
            complex(contour.xmax, contour.ymax),
            complex(contour.xmin, contour.ymax),
        ]
        total = 0.0 + 0.0j
        m = max(8, nodes // 4)
        for a, b in zip(corners, corners[1:] + corners[:1]):
            t = (np.arange(m) + 0.5) / m
            z = a + (b - a) * t
            g = f.dlog_at(z)
            if not np.all(np.isfinite(g)):
                raise ContourThroughZero("logarithmic derivative not finite on contour")
            total += np.sum(g) * (b - a) / m
        val = total / (2j * np.pi)
    else:
        raise TypeError("contour must be a Circle or a Window")
    n = int(round(val.real))
    residual = abs(val - n)
    if residual > 0.25:
        raise ContourThroughZero(
            f"argument-principle residual {residual:.3g} exceeds 0.25"
        )
    if return_residual:
        return n, residual
    return n


def refine_zero(f, guess, multiplicity=1, tol=1e-12, maxiter=60) -> complex:
    """Newton refinement of a zero near `guess`.

    Uses the analytic derivative or logarithmic derivative when present. For a
    zero of known multiplicity m the step -m / dlog converges quadratically.
    Stops when |f| < tol, or when the step stagnates below 5e-14 relative.
    Log-represented functions never use the raw-value criterion: their value
    scale is a free plateau factor, so |f| < tol can hold at points far from
    any zero (or fail everywhere near one).
    """
    f = as_sampled(f)
    z = complex(guess)
    m = max(1, int(multiplicity))
    step_tol = 5e-14
    last = None
    for _ in range(maxiter):
        use_value = f.log_eval is None
        if use_value:
            try:
                fz = complex(f(z))
                if not np.isfinite(fz.real) or not np.isfinite(fz.imag):
                    use_value = False
            except (OverflowError, FloatingPointError):
                use_value = False
        if use_value and abs(fz) < tol and (m == 1 or fz == 0):
            # |f| < tol certifies the position only for simple zeros; an
            # m-fold zero has |f| ~ |z - root|^m and needs step stagnation
            # (or an exact hit)
            return z
        if f.dlog is not None or not use_value:
            g = complex(f.dlog_at(z))
            if g == 0:
                raise NoConvergence("zero logarithmic derivative")
            if not (np.isfinite(g.real) and np.isfinite(g.imag)):
                # dlog blows up exactly at the root
                return z
            step = -m / g
        else:
            d = complex(f.derivative_at(z))
            if d == 0:
                raise NoConvergence("zero derivative in Newton step")
            step = -fz / d * m
        z = z + step
        if last is not None and abs(step) < step_tol * max(1.0, abs(z)):
            if m > 1 or not use_value:
                return z
            # value criterion still pending for simple zeros: allow a
            # couple more sweeps
        last = step
    # final acceptance for value-based runs
    if f.log_eval is None:
        try:
            if abs(complex(f(z))) < tol:
                return z
        except (OverflowError, FloatingPointError):
            pass
    if last is not None and abs(last) < step_tol * max(1.0, abs(z)):
        return z
    raise NoConvergence(f"no zero found near {guess} after {maxiter} iterations")
