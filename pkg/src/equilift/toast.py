"""Covariant toast hierarchies: nested families of compact disk unions
anchored at divisor points, built level by level from local geometry only.

Every choice (marker selection, pruning, absorption) is a function of
difference vectors between divisor points, so translating the divisor by a
quantized shift translates the whole hierarchy exactly. Regions at one level
are pairwise disjoint; a region either gets absorbed into a next-level region
(its disks are adjoined verbatim, making nesting literal) or is re-listed at
the next level unchanged as a repeat, so every region has a parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CompactRegion, Window, circle_crossings, hole_witness, q26
from .divisors import Divisor, detect_stabilizer
from .errors import NonFreeInput, WindowTooSmall

GAP_FRACTION = 0.01      # pruning gap between genuine base disks, in units of r_n
NEIGHBOR_SCALE = 2.0     # signature neighborhood radius, in units of the level scale


@dataclass(frozen=True)
class ToastLevel:
    n: int
    regions: dict            # anchor -> CompactRegion, insertion-ordered
    kinds: dict              # anchor -> "genuine" | "repeat"

    @property
    def anchors(self):
        return tuple(self.regions.keys())

    def translate(self, w):
        w = complex(w)
        return ToastLevel(
            self.n,
            {a + w: r.translate(w) for a, r in self.regions.items()},
            {a + w: k for a, k in self.kinds.items()},
        )


@dataclass(frozen=True)
class ToastForest:
    levels: tuple             # ToastLevel for n = 0..N
    parents: dict             # (n, anchor) -> (n+1, anchor')
    children: dict            # (n, anchor) -> tuple of (n-1, anchor'')
    divisor: Divisor
    r0: float
    gamma: float
    u0: float

    @property
    def depth(self):
        return len(self.levels) - 1

    def region(self, n, anchor):
        return self.levels[n].regions[anchor]

    def locate(self, n, x):
        """Anchor of the unique level-n region containing x, or None."""
        for anchor, region in self.levels[n].regions.items():
            if region.contains(x):
                return anchor
        return None

    def fall_down(self, x, n=None):
        """(m, anchor) for the highest level m <= n whose cover reaches x."""
        if n is None:
            n = self.depth
        for m in range(n, -1, -1):
            a = self.locate(m, x)
            if a is not None:
                return m, a
        return None

    @staticmethod
    def cocycle(a, b):
        """Translation carrying anchor a to anchor b (exact for q26 data)."""
        return complex(b) - complex(a)

    def translate(self, w):
        w = complex(w)
        return ToastForest(
            levels=tuple(lv.translate(w) for lv in self.levels),
            parents={(n, a + w): (m, b + w) for (n, a), (m, b) in self.parents.items()},
            children={(n, a + w): tuple((m, b + w) for m, b in cs)
                      for (n, a), cs in self.children.items()},
            divisor=self.divisor.translate(w, move_window=True),
            r0=self.r0, gamma=self.gamma, u0=self.u0,
        )


# ---------------------------------------------------------------------------
# construction


def _signature_keys(locs, scale):
    """Per-point comparison keys at the given level scale.

    Primary: ascending distances to neighbors within NEIGHBOR_SCALE * scale
    (lex-larger means more isolated). Tiebreak: descending difference
    vectors, which separates swap-symmetric pairs while staying a function
    of differences only. Returns (keys, competitor index lists)."""
    n = len(locs)
    # diff[i][j] = vector from point i to point j
    diff = locs[None, :] - locs[:, None]
    dist = np.abs(diff)
    keys = []
    competitors = []
    for i in range(n):
        nbr = (dist[i] > 0) & (dist[i] <= NEIGHBOR_SCALE * scale)
        ds = np.sort(dist[i][nbr])
        vecs = sorted(((v.real, v.imag) for v in diff[i][nbr]), reverse=True)
        keys.append((tuple(ds.tolist()), tuple(vecs)))
        comp = np.nonzero((dist[i] > 0) & (dist[i] <= scale))[0]
        competitors.append(comp)
    return keys, competitors


def _markers(locs, scale):
    """Indices whose key strictly dominates every competitor within `scale`.

    An exact key tie between mutual competitors means the two points see
    identical difference-vector neighborhoods, i.e. a local translation
    symmetry the covariant rule cannot break."""
    keys, competitors = _signature_keys(locs, scale)
    out = []
    for i in range(len(locs)):
        best = True
        for j in competitors[i]:
            if keys[i] == keys[j]:
                raise NonFreeInput(
                    f"points {locs[i]} and {locs[j]} are locally "
                    f"indistinguishable at scale {scale}"
                )
            if keys[j] > keys[i]:
                best = False
                break
        if best:
            out.append(i)
    out.sort(key=lambda i: keys[i], reverse=True)
    return out


def _disks_intersect(c1, r1, c2, r2):
    """Any closed disk of list 1 meeting any of list 2 (vectorized)."""
    if len(c1) == 0 or len(c2) == 0:
        return False
    d = np.abs(np.asarray(c1)[:, None] - np.asarray(c2)[None, :])
    return bool(np.any(d <= np.asarray(r1)[:, None] + np.asarray(r2)[None, :]))


def _pocket_filler(rel_centers, radii):
    """One covariant disk plugging (or splitting) a complement pocket.

    Absorption can close geometric rings around gap pockets, and regions
    must stay simply connected. Centers come in anchor-relative, so every
    decision is a function of difference data. A 3-ring pocket is the
    curvilinear gap between three mutually crossing circles; it lies inside
    the triangle of its pocket-side crossing points, so the circumscribed
    disk of those corners (with margin) covers it while staying at gap
    scale. A longer ring is split by bridging its shortest chord, which
    strictly shortens rings, so 3-rings remain. Returns (relative center,
    radius) or None when the union is already simply connected.
    """
    cyc = hole_witness(rel_centers, radii)
    if cyc is None:
        return None
    cs = [complex(rel_centers[i]) for i in cyc]
    rs = [float(radii[i]) for i in cyc]
    if len(cyc) == 3:
        m0 = (cs[0] + cs[1] + cs[2]) / 3
        corners = []
        for x, y, z in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            pts = circle_crossings(cs[x], rs[x], cs[y], rs[y])
            if not pts:
                pts = ((cs[x] + cs[y]) / 2,)
            outside = [p for p in pts if abs(p - cs[z]) > rs[z]]
            pick = outside if outside else list(pts)
            corners.append(min(pick, key=lambda p: (abs(p - m0), p.real, p.imag)))
        m = q26(complex(np.mean(corners)))
        return m, 1.25 * max(abs(p - m) for p in corners) + 2.0 ** -20
    best = None
    k = len(cyc)
    for x in range(k):
        for y in range(x + 2, k):
            if x == 0 and y == k - 1:
                continue  # ring-adjacent pair, not a chord
            key = (abs(cs[x] - cs[y]), x, y)
            if best is None or key < best:
                best = key
    _, x, y = best
    m = q26((cs[x] + cs[y]) / 2)
    return m, abs(cs[x] - cs[y]) / 2 * 1.05 + 2.0 ** -20


def build_covariant_toast(d: Divisor, N: int, r0=1.0, gamma=4.0) -> ToastForest:
    """Build the level-0..N hierarchy over d's points.

    Raises NonFreeInput when the configuration has a translation stabilizer
    (or an unbreakable local tie) and WindowTooSmall when the window cannot
    host even the base scale."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if r0 <= 0 or gamma <= 1:
        raise ValueError("need r0 > 0 and gamma > 1")
    if min(d.window.width, d.window.height) < 2 * r0:
        raise WindowTooSmall(
            f"window {d.window} cannot host base disks of radius {r0}"
        )
    rep = detect_stabilizer(d)
    if rep.kind != "free":
        raise NonFreeInput(f"divisor has a {rep.kind} stabilizer {rep.generators}")

    locs = d.locs
    u0 = r0 / 2
    cap = d.window.diameter
    levels = []
    parents = {}
    children = {}

    prev_level = None
    for n in range(N + 1):
        scale = r0 * gamma ** n
        radius = min(scale, cap)
        marker_idx = _markers(locs, scale)

        pool = list(prev_level.regions.items()) if prev_level else []
        taken = [False] * len(pool)

        regions = {}
        kinds = {}
        kept_anchors = []
        kept_centers = []   # flat disk arrays of every kept union
        kept_radii = []
        for i in marker_idx:
            a = complex(locs[i])
            if any(abs(a - b) < 2 * radius + GAP_FRACTION * radius
                   for b in kept_anchors):
                continue
            centers = [a]
            radii = [radius]
            absorbed = []
            fills = 0
            while True:
                changed = False
                for idx, (pa, preg) in enumerate(pool):
                    if taken[idx] or idx in absorbed:
                        continue
                    if _disks_intersect(centers, radii, preg.centers, preg.radii):
                        centers.extend(preg.centers.tolist())
                        radii.extend(preg.radii.tolist())
                        absorbed.append(idx)
                        changed = True
                if changed:
                    continue  # absorption first: fillers may touch more pool
                plug = _pocket_filler(np.array(centers) - a, np.array(radii))
                if plug is None:
                    break
                fills += 1
                if fills > 64:
                    raise RuntimeError(
                        f"region at {a} still has pockets after 64 fills")
                centers.append(a + plug[0])
                radii.append(plug[1])
            if _disks_intersect(centers, radii, kept_centers, kept_radii):
                continue  # junior cedes: seniors already took what they touch
            region = CompactRegion(np.array(centers), np.array(radii))
            regions[a] = region
            kinds[a] = "genuine"
            kept_anchors.append(a)
            kept_centers.extend(centers)
            kept_radii.extend(radii)
            for idx in absorbed:
                taken[idx] = True
            children[(n, a)] = tuple((n - 1, pool[idx][0]) for idx in absorbed)
            for idx in absorbed:
                parents[(n - 1, pool[idx][0])] = (n, a)
        for idx, (pa, preg) in enumerate(pool):
            if taken[idx]:
                continue
            regions[pa] = preg
            kinds[pa] = "repeat"
            parents[(n - 1, pa)] = (n, pa)
            children[(n, pa)] = ((n - 1, pa),)
        levels.append(ToastLevel(n, regions, kinds))
        prev_level = levels[-1]

    return ToastForest(levels=tuple(levels), parents=parents, children=children,
                       divisor=d, r0=r0, gamma=gamma, u0=u0)


# ---------------------------------------------------------------------------
# verification (independent of the construction invariants)


def _disk_subset(lower: CompactRegion, upper: CompactRegion):
    low = set(zip(lower.centers.tolist(), lower.radii.tolist()))
    up = set(zip(upper.centers.tolist(), upper.radii.tolist()))
    return low <= up


def _contained(lower, upper, margin=0.0):
    if margin == 0.0 and _disk_subset(lower, upper):
        return True
    return lower.contained_in(upper, margin=margin)


def verify_axioms(forest: ToastForest, directed_pair_cap=120,
                  cover_resolution=None) -> dict:
    """Re-check the hierarchy axioms from the stored geometry alone.

    Returns {check: {"status": ..., "witnesses": [...]}} where status is
    pass | fail | undetermined (insufficient levels) | pass (finite)."""
    report = {}

    def entry(status, witnesses=()):
        return {"status": status, "witnesses": list(witnesses)[:8]}

    # 1: same-level regions pairwise disjoint
    witnesses = []
    for lv in forest.levels:
        items = list(lv.regions.items())
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                if items[i][1].intersects(items[j][1]):
                    witnesses.append((lv.n, items[i][0], items[j][0]))
    report["same-level-disjoint"] = entry("fail" if witnesses else "pass", witnesses)

    # 1b: every region is simply connected (no complement pockets)
    witnesses = []
    for lv in forest.levels:
        for a, reg in lv.regions.items():
            if not reg.complement_connected():
                witnesses.append((lv.n, a))
    report["simply-connected"] = entry("fail" if witnesses else "pass", witnesses)

    # 2: cross-level pairs disjoint or nested upward
    witnesses = []
    for m in range(forest.depth + 1):
        for n in range(m + 1, forest.depth + 1):
            for la, lreg in forest.levels[m].regions.items():
                for ua, ureg in forest.levels[n].regions.items():
                    if lreg.intersects(ureg) and not _contained(lreg, ureg):
                        witnesses.append((m, la, n, ua))
    report["cross-level-nested"] = entry("fail" if witnesses else "pass", witnesses)

    # 3: every region below the top has a containing parent
    witnesses = []
    for m in range(forest.depth):
        for a, reg in forest.levels[m].regions.items():
            link = forest.parents.get((m, a))
            if link is None:
                witnesses.append((m, a, "no parent"))
                continue
            pn, pa = link
            parent = forest.levels[pn].regions.get(pa)
            if parent is None or not _contained(reg, parent):
                witnesses.append((m, a, "parent does not contain"))
    report["parent-exists"] = entry("fail" if witnesses else "pass", witnesses)

    # 4: directedness with interior containment, sampled pairs
    witnesses = []
    undetermined = []
    pairs = []
    inner = forest.divisor.window.inner()
    low_regions = [(lv.n, a, r) for lv in forest.levels
                   for a, r in lv.regions.items()
                   if inner.contains(a)]
    for i in range(len(low_regions)):
        for j in range(i + 1, len(low_regions)):
            pairs.append((low_regions[i], low_regions[j]))
    if len(pairs) > directed_pair_cap:
        stride = max(1, len(pairs) // directed_pair_cap)
        pairs = pairs[::stride][:directed_pair_cap]
    for (m, a, ra), (n, b, rb) in pairs:
        ok = False
        for lv in forest.levels[max(m, n):]:
            for _, upper in lv.regions.items():
                if (_contained(ra, upper, margin=1e-9)
                        and _contained(rb, upper, margin=1e-9)):
                    ok = True
                    break
            if ok:
                break
        if not ok:
            undetermined.append(((m, a), (n, b)))
    if undetermined:
        report["directed"] = entry("undetermined (insufficient levels)", undetermined)
    else:
        report["directed"] = entry("pass")

    # 5: every region contains the safety disk around its anchor
    witnesses = []
    for lv in forest.levels:
        for a, reg in lv.regions.items():
            probe = CompactRegion.disk(a, forest.u0)
            if not _contained(probe, reg):
                witnesses.append((lv.n, a))
    report["anchor-disk"] = entry("fail" if witnesses else "pass", witnesses)

    # 6: top level covers the inner window
    h = cover_resolution if cover_resolution else forest.r0 / 4
    grid = inner.grid(h).ravel()
    covered = np.zeros(len(grid), dtype=bool)
    for reg in forest.levels[-1].regions.values():
        covered |= reg.contains(grid)
    missing = grid[~covered]
    report["top-cover"] = entry(
        "fail" if len(missing) else "pass",
        [complex(z) for z in missing[:8]],
    )

    # 7: countability is immediate for finite data
    report["countable"] = entry("pass (finite)")

    # extra: absorbed children pack disjointly, so area bounds their number
    witnesses = []
    for (n, a), kids in forest.children.items():
        genuine_kids = [k for k in kids if k != (n - 1, a)]
        if not genuine_kids:
            continue
        reg = forest.levels[n].regions[a]
        bound = reg.area(h=forest.u0 / 4) * 1.1 / (math.pi * forest.u0 ** 2) + 1
        if len(kids) > bound:
            witnesses.append((n, a, len(kids), bound))
    report["child-bound"] = entry("fail" if witnesses else "pass", witnesses)

    return report
