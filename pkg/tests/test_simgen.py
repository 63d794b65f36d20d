import numpy as np
import pytest

from pca_ewc.errors import InvalidData, SpecOutOfRange, UnknownDataId, UnknownScenario
from pca_ewc.simgen import (
    DATA_SPECS,
    FAULTS,
    MIXING,
    FaultSpec,
    gaussian,
    generate_block,
    get_situation,
    inject_fault,
    read_block_csv,
    scenario_dataset,
    source_mean,
    uniform,
    write_block_csv,
)


class TestGenerator:
    def test_noise_free_block_is_rank_three(self):
        X = generate_block(2, 500, 1, noise_std=0.0)
        coef = np.linalg.lstsq(MIXING, X.T, rcond=None)[0]
        assert np.abs(MIXING @ coef - X.T).max() < 1e-10

    def test_mean_propagation(self):
        n = 100_000
        X = generate_block(1, n, 11)
        np.testing.assert_allclose(source_mean(1), [-9.85, -5.0, 2.5])
        specs = DATA_SPECS[1]
        cov = MIXING @ np.diag([s.variance for s in specs]) @ MIXING.T
        tol = 4 * np.sqrt(np.diag(cov) + 1e-6) / np.sqrt(n)
        assert np.all(np.abs(X.mean(axis=0) - MIXING @ source_mean(1)) < tol)

    def test_deterministic(self):
        np.testing.assert_array_equal(generate_block(4, 100, 3), generate_block(4, 100, 3))

    def test_roles_are_independent_streams(self):
        a = generate_block(1, 50, 3, role=0)
        b = generate_block(1, 50, 3, role=1)
        assert not np.allclose(a, b)

    def test_revisited_mode_shares_distribution(self):
        assert DATA_SPECS[3] == DATA_SPECS[1]

    def test_unknown_data(self):
        with pytest.raises(UnknownDataId):
            generate_block(9, 10, 0)

    @pytest.mark.parametrize("bad", [lambda: uniform(1.0, 1.0), lambda: gaussian(0.0, 0.0)])
    def test_source_validation(self, bad):
        with pytest.raises(InvalidData):
            bad()

    def test_shape(self):
        assert generate_block(3, 1000, 0).shape == (1000, 8)


class TestFaults:
    def test_zero_magnitude(self):
        X = generate_block(1, 100, 0)
        Y, labels = inject_fault(X, FaultSpec("step", 2, 40, 0.0))
        np.testing.assert_array_equal(X, Y)
        assert labels.sum() == 61

    def test_step_labels(self):
        X = generate_block(1, 1000, 0)
        Y, labels = inject_fault(X, FAULTS[1])
        assert labels.sum() == 500 and not labels[:500].any()
        d = Y - X
        np.testing.assert_allclose(d[500:, 2], 0.1)
        assert np.count_nonzero(d[:, [0, 1, 3, 4, 5, 6, 7]]) == 0
        assert np.count_nonzero(d[:500]) == 0

    def test_slope_end_value(self):
        X = generate_block(1, 1000, 0)
        Y, _ = inject_fault(X, FAULTS[3])
        d = Y[:, 0] - X[:, 0]
        assert d[-1] == pytest.approx(1.0)
        assert d[500] == pytest.approx(0.002)
        assert d[499] == 0.0

    def test_input_untouched(self):
        X = generate_block(1, 600, 0)
        X0 = X.copy()
        inject_fault(X, FAULTS[2])
        np.testing.assert_array_equal(X, X0)

    @pytest.mark.parametrize("spec", [FaultSpec("step", 9, 10, 1.0), FaultSpec("step", 1, 0, 1.0), FaultSpec("slope", 1, 2000, 1.0)])
    def test_out_of_range(self, spec):
        with pytest.raises(SpecOutOfRange):
            inject_fault(np.zeros((1000, 8)), spec)

    def test_kind(self):
        with pytest.raises(SpecOutOfRange):
            FaultSpec("drift", 1, 1, 1.0)


class TestScenario:
    def test_situation_one(self):
        d = scenario_dataset(1, FAULTS[1], 0)
        assert set(d.train) == {1} and d.normal is None
        assert d.test.shape == (1000, 8)
        np.testing.assert_array_equal(d.train[1], generate_block(1, 1000, 0))

    def test_situation_three_has_no_new_training_mode(self):
        d = scenario_dataset(3, FAULTS[1], 0)
        assert set(d.train) == {1, 2}
        assert d.situation.test_data == 3 and d.normal.shape == (1000, 8)

    def test_situation_five(self):
        d = scenario_dataset(5, FAULTS[2], 0)
        assert d.situation.test_data == 4 and d.situation.model == "B"

    def test_unknown(self):
        with pytest.raises(UnknownScenario):
            get_situation(7)


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path):
        X, labels = inject_fault(generate_block(2, 50, 0), FaultSpec("step", 1, 20, 0.5))
        p = tmp_path / "b.csv"
        write_block_csv(p, X, labels)
        Y, lab, names = read_block_csv(p)
        np.testing.assert_array_equal(X, Y)
        np.testing.assert_array_equal(labels, lab)
        assert names == [f"x{i}" for i in range(1, 9)]

    def test_generic_csv(self, tmp_path):
        p = tmp_path / "plant.csv"
        p.write_text("temp,flow,pressure\n1.5,2,3\n4,5.25,6\n")
        X, labels, names = read_block_csv(p)
        assert labels is None and names == ["temp", "flow", "pressure"]
        np.testing.assert_array_equal(X, [[1.5, 2, 3], [4, 5.25, 6]])

    def test_bad_csv(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,x\n")
        with pytest.raises(InvalidData):
            read_block_csv(p)
