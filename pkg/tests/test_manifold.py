import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from affectmap.manifold import (
    AffectiveState,
    ManifoldSpec,
    MarginMatrix,
    MindSpec,
    StateLayout,
    canonical_margins,
    canonical_state_names,
    classical_mds,
    embeddability_check,
    layout_to_margins,
    linear_chain_margins,
)

C45 = np.cos(np.pi / 4)
S45 = np.sin(np.pi / 4)
# unit chain with 135-degree interior angles at the two middle points
BENT_CHAIN = [(-C45, S45), (0.0, 0.0), (1.0, 0.0), (1.0 + C45, S45)]


class TestLinearChainMargins:
    def test_four_states_unit(self):
        expected = np.array([
            [0, 1, 2, 3],
            [1, 0, 1, 2],
            [2, 1, 0, 1],
            [3, 2, 1, 0],
        ], dtype=float)
        assert np.array_equal(linear_chain_margins(4, 1.0).entries, expected)

    def test_two_states(self):
        assert np.array_equal(
            linear_chain_margins(2, 1.0).entries, [[0.0, 1.0], [1.0, 0.0]]
        )

    def test_unit_scaling(self):
        expected = np.array([[0, 2, 4], [2, 0, 2], [4, 2, 0]], dtype=float)
        assert np.array_equal(linear_chain_margins(3, 2.0).entries, expected)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            linear_chain_margins(1, 1.0)
        with pytest.raises(ValueError):
            linear_chain_margins(4, 0.0)
        with pytest.raises(ValueError):
            linear_chain_margins(4, -1.0)


class TestLayoutToMargins:
    def test_bent_chain_near_printed_love_matrix(self):
        # the printed hate-love entry is 2.404 while the 135-degree
        # construction measures 1 + sqrt(2) ~ 2.414; entrywise gap stays
        # within 0.011
        measured = layout_to_margins(StateLayout(BENT_CHAIN)).entries
        printed = canonical_margins("love_nonlinear").entries
        assert np.abs(measured - printed).max() <= 0.011
        assert measured[0, 3] == pytest.approx(1 + np.sqrt(2))
        assert measured[0, 2] == pytest.approx(1.8478, abs=1e-4)

    def test_collinear_equals_linear_chain(self):
        layout = StateLayout([(0, 0), (1, 0), (2, 0), (3, 0)])
        assert np.allclose(
            layout_to_margins(layout).entries,
            linear_chain_margins(4, 1.0).entries,
            atol=1e-12,
        )

    def test_duplicate_points_rejected(self):
        with pytest.raises(ValueError):
            StateLayout([(0, 0), (1, 1), (0, 0)])

    def test_rotation_translation_mirror_invariance(self):
        rng = np.random.default_rng(42)
        coords = rng.normal(size=(5, 2)) * 3
        base = layout_to_margins(StateLayout(coords)).entries
        theta = 1.234
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        mirror = np.array([[1.0, 0.0], [0.0, -1.0]])
        moved = coords @ rot.T @ mirror + np.array([5.0, -7.0])
        assert np.allclose(
            layout_to_margins(StateLayout(moved)).entries, base, atol=1e-12
        )

    def test_scaling_scales_margins(self):
        coords = np.array([(0.0, 0.0), (1.0, 2.0), (-3.0, 1.0)])
        base = layout_to_margins(StateLayout(coords)).entries
        doubled = layout_to_margins(StateLayout(coords * 2.0)).entries
        assert np.array_equal(doubled, 2.0 * base)  # powers of two are exact
        c = 3.7
        scaled = layout_to_margins(StateLayout(coords * c)).entries
        assert np.allclose(scaled, c * base, rtol=1e-12)


class TestCanonicalMargins:
    def test_love_nonlinear_values(self):
        m = canonical_margins("love_nonlinear").entries
        assert m[0][3] == 2.404
        assert m[0][2] == 1.848
        assert m[1][2] == 1.0

    def test_joy_values(self):
        m = canonical_margins("joy").entries
        assert m[0][4] == 3.318
        assert m[1][3] == 1.788
        assert m[2][4] == 1.932

    def test_love_linear_equals_chain(self):
        assert np.array_equal(
            canonical_margins("love_linear").entries,
            linear_chain_margins(4, 1.0).entries,
        )

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            canonical_margins("sorrow")

    @pytest.mark.parametrize("which", ["love_linear", "love_nonlinear", "joy"])
    def test_margin_matrix_invariants(self, which):
        m = canonical_margins(which).entries
        assert np.array_equal(m, m.T)
        assert np.all(np.diag(m) == 0)
        off = ~np.eye(m.shape[0], dtype=bool)
        assert np.all(m[off] > 0)

    @pytest.mark.parametrize("which,names", [
        ("love_linear", ("hate", "dislike", "like", "love")),
        ("joy", ("suffered", "feared", "worried", "enjoying", "relaxed", "bored")),
    ])
    def test_state_names(self, which, names):
        assert canonical_state_names(which) == names
        assert len(names) == canonical_margins(which).size


class TestMarginMatrixValidation:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            MarginMatrix([[0, 1], [2, 0]])

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            MarginMatrix([[1, 1], [1, 0]])

    def test_rejects_zero_off_diagonal(self):
        with pytest.raises(ValueError):
            MarginMatrix([[0, 0], [0, 0]])

    def test_entries_read_only(self):
        m = canonical_margins("joy")
        with pytest.raises(ValueError):
            m.entries[0, 1] = 5.0


class TestEmbeddability:
    def test_linear_chain_fits_one_dimension(self):
        report = embeddability_check(linear_chain_margins(4, 1.0), 1)
        assert report.embeddable
        positive = report.eigenvalues > report.tolerance
        assert positive.sum() == 1

    def test_triangle_violation_not_embeddable(self):
        bad = MarginMatrix([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
        assert not embeddability_check(bad, 2).embeddable
        assert not embeddability_check(bad, 2, rel_tol=0.02).embeddable
        assert embeddability_check(bad, 2).eigenvalues.min() < -0.5

    def test_joy_needs_print_precision_tolerance(self):
        # as printed (3-4 significant digits) the joy matrix carries a small
        # non-Euclidean component: a third positive eigenvalue ~0.12 and a
        # negative one ~-0.011.  At the strict default it fails; judged at
        # print precision it is 2-D embeddable.
        joy = canonical_margins("joy")
        assert not embeddability_check(joy, 2).embeddable
        assert embeddability_check(joy, 2, rel_tol=0.02).embeddable

    def test_exact_layout_embeddable_at_default(self):
        margins = layout_to_margins(StateLayout(BENT_CHAIN))
        assert embeddability_check(margins, 2).embeddable


class TestClassicalMds:
    def test_round_trip_exact_layout(self):
        margins = layout_to_margins(StateLayout(BENT_CHAIN))
        coords = classical_mds(margins, 2)
        again = layout_to_margins(StateLayout(coords))
        assert np.abs(again.entries - margins.entries).max() < 1e-9

    def test_love_nonlinear_round_trip_close(self):
        printed = canonical_margins("love_nonlinear")
        coords = classical_mds(printed, 2)
        again = layout_to_margins(StateLayout(coords))
        assert np.abs(again.entries - printed.entries).max() <= 0.02

    def test_joy_round_trip_error_documented(self):
        # the printed joy matrix is not exactly 2-D realizable; classical
        # MDS leaves a ~0.067 worst-entry residual (concentrated in the
        # "feared" row, whose 2.573/2.761 entries break the mirror symmetry
        # the other rows imply)
        printed = canonical_margins("joy")
        coords = classical_mds(printed, 2)
        again = layout_to_margins(StateLayout(coords))
        err = np.abs(again.entries - printed.entries).max()
        assert 0.05 < err < 0.08

    def test_collinear_layout_recovers_in_two_dims(self):
        margins = linear_chain_margins(5, 1.5)
        coords = classical_mds(margins, 2)
        again = layout_to_margins(StateLayout(coords))
        assert np.abs(again.entries - margins.entries).max() < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.lists(
        st.tuples(
            st.floats(min_value=-10, max_value=10),
            st.floats(min_value=-10, max_value=10),
        ),
        min_size=3, max_size=7, unique=True,
    ))
    def test_mds_round_trip_idempotent(self, points):
        coords = np.asarray(points, dtype=float)
        diff = coords[:, None, :] - coords[None, :, :]
        d2 = (diff ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        assume(d2.min() >= 1e-4)  # nearly coincident points are out of contract
        margins = layout_to_margins(StateLayout(coords))
        recovered = classical_mds(margins, 2)
        again = layout_to_margins(StateLayout(recovered))
        assert np.abs(again.entries - margins.entries).max() < 1e-9


class TestManifoldSpec:
    def _spec(self):
        return ManifoldSpec.from_names(
            "love", canonical_state_names("love_nonlinear"),
            canonical_margins("love_nonlinear"), 2, 20,
        )

    def test_valid_spec(self):
        spec = self._spec()
        assert spec.state_names == ("hate", "dislike", "like", "love")
        assert spec.margins.size == 4

    def test_duplicate_state_names_rejected(self):
        with pytest.raises(ValueError):
            ManifoldSpec.from_names(
                "m", ("a", "a"), linear_chain_margins(2), 1, 2
            )

    def test_non_contiguous_ids_rejected(self):
        states = (AffectiveState(0, "a"), AffectiveState(2, "b"))
        with pytest.raises(ValueError):
            ManifoldSpec("m", states, linear_chain_margins(2), 1, 2)

    def test_margin_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ManifoldSpec.from_names("m", ("a", "b"), linear_chain_margins(3), 1, 2)

    def test_embedding_dim_exceeding_input_rejected(self):
        with pytest.raises(ValueError):
            ManifoldSpec.from_names("m", ("a", "b"), linear_chain_margins(2), 3, 2)

    def test_json_round_trip(self, tmp_path):
        spec = self._spec()
        path = tmp_path / "spec.json"
        spec.save(path)
        loaded = ManifoldSpec.load(path)
        assert loaded.name == spec.name
        assert loaded.state_names == spec.state_names
        assert np.array_equal(loaded.margins.entries, spec.margins.entries)
        assert (loaded.embedding_dim, loaded.input_dim) == (2, 20)
        doc = json.loads(path.read_text())
        assert set(doc) == {"name", "states", "margins", "embedding_dim", "input_dim"}

    def test_mind_spec_unique_names(self):
        spec = self._spec()
        with pytest.raises(ValueError):
            MindSpec((spec, spec))
        # shared state names across manifolds are fine
        other = ManifoldSpec.from_names(
            "joy", canonical_state_names("joy"), canonical_margins("joy"), 2, 20
        )
        mind = MindSpec((spec, other))
        assert len(mind.manifolds) == 2
