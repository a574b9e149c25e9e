"""Validation, mapping, and round-trip behavior of the shared types."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dafte.core import (
    EnsembleWeights,
    LabelSpace,
    OutputMapping,
    PredictionMatrix,
    map_outputs,
    validate_prediction_matrix,
)
from dafte.errors import (
    ArityMismatch,
    NegativeEntry,
    RowMassOutOfTolerance,
    RowMassZero,
    ZeroMassAfterMapping,
)

BINARY = LabelSpace(("neg", "pos"))
TERNARY = LabelSpace(("neg", "neu", "pos"))


def simplex_rows(arity: int, max_rows: int = 8):
    """Strategy: matrices of rows on the probability simplex."""
    positive = st.floats(min_value=1e-3, max_value=1.0, allow_nan=False)
    row = st.lists(positive, min_size=arity, max_size=arity).map(
        lambda v: (np.array(v) / np.sum(v)).tolist()
    )
    return st.lists(row, min_size=1, max_size=max_rows).map(np.array)


class TestLabelSpace:
    def test_needs_two_classes(self):
        with pytest.raises(ArityMismatch):
            LabelSpace(("only",))

    def test_rejects_duplicates(self):
        with pytest.raises(ArityMismatch):
            LabelSpace(("a", "a"))

    def test_keeps_declared_order(self):
        assert LabelSpace(("z", "a")).classes == ("z", "a")


class TestValidatePredictionMatrix:
    def test_on_simplex_unchanged(self):
        raw = [[0.6, 0.4], [0.2, 0.8]]
        pred = validate_prediction_matrix(raw, BINARY)
        assert np.array_equal(pred.rows, np.array(raw))

    def test_within_tolerance_renormalized(self):
        pred = validate_prediction_matrix([[0.6000003, 0.4]], BINARY)
        assert pred.rows.sum() == pytest.approx(1.0, abs=1e-12)
        assert pred.rows[0, 0] == pytest.approx(0.6, abs=1e-6)

    def test_mass_out_of_tolerance_rejected(self):
        with pytest.raises(RowMassOutOfTolerance):
            validate_prediction_matrix([[0.9, 0.3]], BINARY)

    def test_negative_entry_rejected(self):
        with pytest.raises(NegativeEntry):
            validate_prediction_matrix([[1.1, -0.1]], BINARY)

    def test_zero_mass_rejected(self):
        with pytest.raises(RowMassZero):
            validate_prediction_matrix([[0.0, 0.0]], BINARY)

    def test_ragged_rows_rejected(self):
        with pytest.raises(ArityMismatch):
            validate_prediction_matrix([[0.5, 0.5], [1.0]], BINARY)

    def test_arity_mismatch_rejected(self):
        with pytest.raises(ArityMismatch):
            validate_prediction_matrix([[0.2, 0.3, 0.5]], BINARY)

    def test_rows_become_immutable(self):
        pred = validate_prediction_matrix([[0.5, 0.5]], BINARY)
        with pytest.raises(ValueError):
            pred.rows[0, 0] = 1.0

    @given(rows=simplex_rows(3))
    @settings(max_examples=50, deadline=None)
    def test_accepted_rows_stay_on_simplex(self, rows):
        pred = validate_prediction_matrix(rows, TERNARY)
        assert np.all(pred.rows >= 0)
        assert np.all(pred.rows <= 1)
        np.testing.assert_allclose(pred.rows.sum(axis=1), 1.0, atol=1e-9)


class TestMapOutputs:
    def test_identity_is_bitwise_identity(self):
        pred = validate_prediction_matrix([[0.6, 0.4], [1 / 3, 2 / 3]], BINARY)
        mapped = map_outputs(pred, OutputMapping.identity(BINARY))
        assert np.array_equal(mapped.rows, pred.rows)

    def test_class_drop_renormalizes(self):
        # 3-class row with the middle class dropped: (0.5, 0.2) -> keeps 0 and 2.
        pred = validate_prediction_matrix([[0.5, 0.3, 0.2]], TERNARY)
        mapping = OutputMapping(
            np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), source=TERNARY, target=BINARY
        )
        mapped = map_outputs(pred, mapping)
        np.testing.assert_allclose(mapped.rows, [[0.5 / 0.7, 0.2 / 0.7]], atol=1e-12)

    def test_spec_drop_example(self):
        # dropping class 2, keeping classes 0 and 1: (0.5, 0.3) -> (0.625, 0.375)
        pred = validate_prediction_matrix([[0.5, 0.3, 0.2]], TERNARY)
        mapping = OutputMapping(
            np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), source=TERNARY, target=BINARY
        )
        mapped = map_outputs(pred, mapping)
        np.testing.assert_allclose(mapped.rows, [[0.625, 0.375]], atol=1e-12)

    def test_all_mass_dropped_raises(self):
        pred = validate_prediction_matrix([[0.0, 0.0, 1.0]], TERNARY)
        mapping = OutputMapping(
            np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), source=TERNARY, target=BINARY
        )
        with pytest.raises(ZeroMassAfterMapping):
            map_outputs(pred, mapping)

    def test_source_space_must_match(self):
        pred = validate_prediction_matrix([[0.5, 0.5]], BINARY)
        with pytest.raises(ArityMismatch):
            map_outputs(pred, OutputMapping.identity(TERNARY))

    @given(rows=simplex_rows(3))
    @settings(max_examples=50, deadline=None)
    def test_mapping_preserves_simplex(self, rows):
        pred = validate_prediction_matrix(rows, TERNARY)
        mapping = OutputMapping(
            np.array([[0.9, 0.0, 0.1], [0.1, 0.8, 0.2]]), source=TERNARY, target=BINARY
        )
        mapped = map_outputs(pred, mapping)
        np.testing.assert_allclose(mapped.rows.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(mapped.rows >= 0)
        assert np.all(mapped.rows <= 1)


class TestOutputMappingInvariants:
    def test_negative_entries_rejected(self):
        with pytest.raises(NegativeEntry):
            OutputMapping(np.array([[1.0, -0.1], [0.0, 1.0]]), source=BINARY, target=BINARY)

    def test_column_mass_capped(self):
        from dafte.errors import MappingArityMismatch

        with pytest.raises(MappingArityMismatch):
            OutputMapping(np.array([[1.0, 0.0], [0.5, 1.0]]), source=BINARY, target=BINARY)

    def test_all_zero_rejected(self):
        from dafte.errors import MappingArityMismatch

        with pytest.raises(MappingArityMismatch):
            OutputMapping(np.zeros((2, 2)), source=BINARY, target=BINARY)


class TestEnsembleWeights:
    def test_uniform_initialization(self):
        weights = EnsembleWeights.uniform(2, 4)
        assert np.all(weights.w == 0.25)
        assert np.all(weights.intercepts == 0.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ArityMismatch):
            EnsembleWeights(np.array([[np.inf, 0.0]]), np.zeros(1))


class TestPredictionMatrixInvariants:
    def test_sample_ids_align(self):
        with pytest.raises(ArityMismatch):
            PredictionMatrix("m", np.array([[0.5, 0.5]]), BINARY, sample_ids=("a", "b"))

    def test_ids_default_positional(self):
        pred = validate_prediction_matrix([[0.5, 0.5], [0.1, 0.9]], BINARY)
        assert pred.ids() == ("0", "1")
