import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msfactor.exceptions import (
    DegenerateChainError,
    NonFiniteError,
    TooSmallError,
)
from msfactor.types import (
    Panel,
    ProbabilityPath,
    RngHandle,
    StateProbabilities,
    TransitionMatrix,
    unconditional_probs,
    validate_panel,
)

probs = st.floats(min_value=1e-6, max_value=1.0 - 1e-6)


class TestValidatePanel:
    def test_well_formed(self):
        panel = validate_panel(np.ones((3, 3)))
        assert panel.t_len == 3 and panel.n_len == 3

    def test_nan_reports_position(self):
        data = np.zeros((4, 4))
        data[1, 2] = np.nan
        with pytest.raises(NonFiniteError) as err:
            validate_panel(data)
        assert err.value.row == 1 and err.value.col == 2

    def test_inf_rejected(self):
        data = np.zeros((3, 3))
        data[0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            validate_panel(data)

    def test_too_small(self):
        with pytest.raises(TooSmallError):
            validate_panel(np.ones((1, 5)))
        with pytest.raises(TooSmallError):
            validate_panel(np.ones((5, 1)))

    def test_data_is_read_only(self):
        panel = validate_panel(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            panel.data[0, 0] = 1.0


class TestTransitionMatrix:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            TransitionMatrix(np.array([[0.9, 0.2], [0.3, 0.7]]))

    def test_entries_must_be_probabilities(self):
        with pytest.raises(ValueError):
            TransitionMatrix(np.array([[1.2, -0.2], [0.3, 0.7]]))

    def test_relabeled_swaps_states(self):
        trans = TransitionMatrix(np.array([[0.9, 0.1], [0.3, 0.7]]))
        swapped = trans.relabeled()
        assert swapped.p11 == 0.7 and swapped.p22 == 0.9
        assert swapped.p[0, 1] == 0.3 and swapped.p[1, 0] == 0.1


class TestUnconditionalProbs:
    def test_paper_example(self):
        trans = TransitionMatrix(np.array([[0.9, 0.1], [0.3, 0.7]]))
        stat = unconditional_probs(trans).values
        assert np.allclose(stat, [0.75, 0.25], atol=1e-15)

    def test_symmetric(self):
        trans = TransitionMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
        assert np.allclose(unconditional_probs(trans).values, [0.5, 0.5])

    def test_degenerate(self):
        with pytest.raises(DegenerateChainError):
            unconditional_probs(TransitionMatrix(np.eye(2)))

    @given(p11=probs, p22=probs)
    @settings(max_examples=200)
    def test_fixed_point(self, p11, p22):
        trans = TransitionMatrix(
            np.array([[p11, 1.0 - p11], [1.0 - p22, p22]])
        )
        stat = unconditional_probs(trans).values
        assert np.abs(trans.p.T @ stat - stat).max() < 1e-12


class TestStateProbabilities:
    def test_sum_enforced(self):
        with pytest.raises(ValueError):
            StateProbabilities(np.array([0.6, 0.5]))

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            StateProbabilities(np.array([1.5, -0.5]))


class TestProbabilityPath:
    @staticmethod
    def _uniform_path(t_len=4):
        half = np.full((t_len, 2), 0.5)
        quarter = np.full((t_len, 4), 0.25)
        return ProbabilityPath(
            predicted=half, filtered=half, smoothed=half, cross=quarter, loglik=-1.0
        )

    def test_valid_path(self):
        path = self._uniform_path()
        assert path.t_len == 4

    def test_row_sum_violation(self):
        half = np.full((3, 2), 0.5)
        bad = np.full((3, 4), 0.3)
        with pytest.raises(ValueError):
            ProbabilityPath(predicted=half, filtered=half, smoothed=half, cross=bad, loglik=0.0)

    def test_marginalisation_violation(self):
        half = np.full((3, 2), 0.5)
        cross = np.tile([0.5, 0.3, 0.1, 0.1], (3, 1))
        with pytest.raises(ValueError):
            ProbabilityPath(predicted=half, filtered=half, smoothed=half, cross=cross, loglik=0.0)


class TestRngHandle:
    def test_identical_streams_identical_draws(self):
        a = RngHandle(seed=11, stream=3).generator().standard_normal(16)
        b = RngHandle(seed=11, stream=3).generator().standard_normal(16)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngHandle(seed=11, stream=0).generator().standard_normal(16)
        b = RngHandle(seed=11, stream=1).generator().standard_normal(16)
        assert not np.array_equal(a, b)

    def test_substream(self):
        handle = RngHandle(seed=5)
        assert handle.substream(9) == RngHandle(seed=5, stream=9)
