"""Toast hierarchy construction, axioms, covariance, and violation detection."""

import math

import numpy as np
import pytest

from equilift.core import CompactRegion, Window, q26
from equilift.divisors import Divisor, generate
from equilift.errors import NonFreeInput, WindowTooSmall
from equilift.toast import ToastForest, ToastLevel, build_covariant_toast, verify_axioms

WIN8 = Window(-8, 8, -8, 8)
WIN16 = Window(-16, 16, -16, 16)

PASSING = ("same-level-disjoint", "simply-connected", "cross-level-nested",
           "parent-exists", "anchor-disk", "top-cover", "child-bound")


def single_point_forest(N=3):
    d = Divisor(np.array([0.5 + 0.5j]), np.array([1]), WIN8)
    return build_covariant_toast(d, N=N, r0=1.0, gamma=4.0)


class TestSinglePoint:
    def test_concentric_chain(self):
        forest = single_point_forest()
        assert forest.depth == 3
        cap = WIN8.diameter
        for n, lv in enumerate(forest.levels):
            assert lv.anchors == (0.5 + 0.5j,)
            region = lv.regions[0.5 + 0.5j]
            # absorption adjoins lower disks verbatim: one disk per level
            assert len(region.centers) == n + 1
            assert np.all(region.centers == 0.5 + 0.5j)
            expected = min(4.0 ** n, cap)
            assert abs(max(region.radii) - expected) < 1e-7

    def test_parent_chain(self):
        forest = single_point_forest()
        a = 0.5 + 0.5j
        for n in range(3):
            assert forest.parents[(n, a)] == (n + 1, a)
        assert forest.children[(1, a)] == ((0, a),)

    def test_axioms(self):
        report = verify_axioms(single_point_forest())
        for name in PASSING:
            assert report[name]["status"] == "pass", (name, report[name])
        assert report["countable"]["status"] == "pass (finite)"
        assert report["directed"]["status"] in (
            "pass", "undetermined (insufficient levels)")


class TestTwoPoints:
    def forest(self):
        d = Divisor(np.array([0j, 3 + 0j]), np.array([1, 1]), WIN8)
        return build_covariant_toast(d, N=2, r0=1.0, gamma=4.0)

    def test_level0_two_regions_level1_merged(self):
        forest = self.forest()
        assert set(forest.levels[0].anchors) == {0j, 3 + 0j}
        # at scale 4 both points compete and the difference-vector tiebreak
        # (+3 beats -3) makes the left point the marker
        assert forest.levels[1].anchors == (0j,)
        assert forest.levels[1].kinds[0j] == "genuine"
        kids = set(forest.children[(1, 0j)])
        assert kids == {(0, 0j), (0, 3 + 0j)}

    def test_locate_and_fall_down(self):
        forest = self.forest()
        assert forest.locate(0, 0.5 + 0j) == 0j
        assert forest.locate(0, 3.2 + 0.1j) == 3 + 0j
        assert forest.locate(0, 1.7 + 0j) is None  # between the base disks
        assert forest.fall_down(1.7 + 0j, 1) == (1, 0j)
        assert forest.fall_down(0.5 + 0j, 0) == (0, 0j)

    def test_axioms(self):
        report = verify_axioms(self.forest())
        for name in PASSING:
            assert report[name]["status"] == "pass", (name, report[name])

    def test_cocycle(self):
        assert ToastForest.cocycle(1 + 1j, 4 + 0j) == 3 - 1j


@pytest.fixture(scope="module")
def poisson_forest():
    d = generate("poisson", WIN16, seed=0, intensity=0.5)
    return build_covariant_toast(d, N=3, r0=1.0, gamma=4.0)


class TestPoissonForest:
    @pytest.fixture()
    def forest(self, poisson_forest):
        return poisson_forest

    def test_axioms(self, forest):
        report = verify_axioms(forest)
        for name in PASSING:
            assert report[name]["status"] == "pass", (name, report[name])

    def test_top_level_is_single_global_region(self, forest):
        # scale 64 exceeds the window diameter, so one region covers all
        assert len(forest.levels[3].regions) == 1

    def test_every_divisor_point_reached(self, forest):
        for p in forest.divisor.locs:
            hit = forest.fall_down(p)
            assert hit is not None

    def test_repeats_carry_region_unchanged(self, forest):
        found = 0
        for lv in forest.levels[1:]:
            for a, kind in lv.kinds.items():
                if kind != "repeat":
                    continue
                found += 1
                prev = forest.levels[lv.n - 1].regions[a]
                cur = lv.regions[a]
                assert np.array_equal(prev.centers, cur.centers)
                assert np.array_equal(prev.radii, cur.radii)
                assert forest.parents[(lv.n - 1, a)] == (lv.n, a)
        assert found > 0

    def test_absorption_is_literal_disk_inclusion(self, forest):
        for (n, a), kids in forest.children.items():
            if n == 0:
                continue
            parent = forest.levels[n].regions[a]
            pdisks = set(zip(parent.centers.tolist(), parent.radii.tolist()))
            for (m, b) in kids:
                child = forest.levels[m].regions[b]
                cdisks = set(zip(child.centers.tolist(), child.radii.tolist()))
                assert cdisks <= pdisks

    def test_anchors_are_divisor_points(self, forest):
        pts = set(forest.divisor.locs.tolist())
        for lv in forest.levels:
            assert set(lv.anchors) <= pts


class TestCovariance:
    def test_exact_shift_covariance(self):
        d = generate("poisson", WIN16, seed=5, intensity=0.5)
        w = q26(0.37 + 1.2j)
        forest = build_covariant_toast(d, N=2, r0=1.0, gamma=4.0)
        moved = build_covariant_toast(d.translate(w, move_window=True),
                                      N=2, r0=1.0, gamma=4.0)
        reference = forest.translate(w)
        for lv_m, lv_r in zip(moved.levels, reference.levels):
            assert lv_m.anchors == lv_r.anchors
            assert lv_m.kinds == lv_r.kinds
            for a in lv_m.anchors:
                rm, rr = lv_m.regions[a], lv_r.regions[a]
                assert np.array_equal(rm.centers, rr.centers)
                assert np.array_equal(rm.radii, rr.radii)
        assert moved.parents == reference.parents

    def test_anchor_selection_is_relative(self):
        # the marker tiebreak must depend on differences only: a pure
        # translation cannot change which point of a pair wins
        d = Divisor(np.array([0j, 1 + 1j]), np.array([1, 1]), WIN8)
        w = 2.0 + 0.5j
        f0 = build_covariant_toast(d, N=1)
        f1 = build_covariant_toast(d.translate(w, move_window=True), N=1)
        assert f1.levels[1].anchors == tuple(a + w for a in f0.levels[1].anchors)


class TestRejections:
    def test_lattice_is_non_free(self):
        d = generate("periodic-lattice", WIN8, spacing=1.0)
        with pytest.raises(NonFreeInput):
            build_covariant_toast(d, N=1)

    def test_window_too_small(self):
        d = Divisor(np.array([0.5 + 0.5j]), np.array([1]), Window(0, 1.5, 0, 12))
        with pytest.raises(WindowTooSmall):
            build_covariant_toast(d, N=1, r0=1.0)

    def test_bad_parameters(self):
        d = Divisor(np.array([0j]), np.array([1]), WIN8)
        with pytest.raises(ValueError):
            build_covariant_toast(d, N=-1)
        with pytest.raises(ValueError):
            build_covariant_toast(d, N=1, gamma=1.0)


class TestViolationDetection:
    """verify_axioms must catch hand-built broken hierarchies with witnesses."""

    @staticmethod
    def forged(levels, parents=None, children=None):
        d = Divisor(np.array([0j]), np.array([1]), WIN8)
        return ToastForest(levels=tuple(levels), parents=parents or {},
                           children=children or {}, divisor=d,
                           r0=1.0, gamma=4.0, u0=0.5)

    def test_same_level_overlap_detected(self):
        lv = ToastLevel(0, {0j: CompactRegion.disk(0j, 1.0),
                            0.5 + 0j: CompactRegion.disk(0.5 + 0j, 1.0)},
                        {0j: "genuine", 0.5 + 0j: "genuine"})
        report = verify_axioms(self.forged([lv]))
        assert report["same-level-disjoint"]["status"] == "fail"
        witness = report["same-level-disjoint"]["witnesses"][0]
        assert witness[0] == 0 and {witness[1], witness[2]} == {0j, 0.5 + 0j}

    def test_cross_level_straddle_detected(self):
        lv0 = ToastLevel(0, {0j: CompactRegion.disk(0j, 1.0)}, {0j: "genuine"})
        lv1 = ToastLevel(1, {1.5 + 0j: CompactRegion.disk(1.5 + 0j, 1.0)},
                         {1.5 + 0j: "genuine"})
        report = verify_axioms(self.forged(
            [lv0, lv1], parents={(0, 0j): (1, 1.5 + 0j)}))
        assert report["cross-level-nested"]["status"] == "fail"
        m, la, n, ua = report["cross-level-nested"]["witnesses"][0]
        assert (m, n) == (0, 1) and la == 0j and ua == 1.5 + 0j

    def test_missing_parent_detected(self):
        lv0 = ToastLevel(0, {0j: CompactRegion.disk(0j, 1.0)}, {0j: "genuine"})
        lv1 = ToastLevel(1, {0j: CompactRegion.disk(0j, 4.0)}, {0j: "genuine"})
        report = verify_axioms(self.forged([lv0, lv1]))
        assert report["parent-exists"]["status"] == "fail"

    def test_anchor_disk_violation_detected(self):
        # region anchored at 0 but positioned elsewhere misses D(0, u0)
        lv = ToastLevel(0, {0j: CompactRegion.disk(5 + 0j, 1.0)}, {0j: "genuine"})
        report = verify_axioms(self.forged([lv]))
        assert report["anchor-disk"]["status"] == "fail"

    def test_top_cover_violation_detected(self):
        lv = ToastLevel(0, {0j: CompactRegion.disk(0j, 1.0)}, {0j: "genuine"})
        report = verify_axioms(self.forged([lv]))
        assert report["top-cover"]["status"] == "fail"
        assert len(report["top-cover"]["witnesses"]) > 0
