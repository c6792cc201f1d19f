# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""数据集、矩函数与工具变量标准化"""


from __future__ import annotations

import numpy as np
import pytest

from ivqrlab.errors import (
    CellParseError,
    ConfigError,
    DataError,
    IdentificationError,
    MissingColumnError,
    SingularityError,
)
from ivqrlab.model import (
    Dataset,
    MomentFamily,
    MomentModel,
    detect_intercept_column,
    load_dataset,
    moment_contribution,
    moment_sup_norm,
    standardize_instruments,
)
from ivqrlab.utils.paths import DEMO_CSV_PATH


def _tiny(censoring=None) -> Dataset:
    ones = np.ones((3, 1))
    return Dataset(y=[1.0, 2.0, 3.0], x=ones, z=ones, censoring=censoring)


class TestDataset:

    def test_shapes_and_names(self):
        ds = _tiny()
        assert (ds.n, ds.p, ds.L) == (3, 1, 1)
        assert ds.x_names == ("x0",)
        assert ds.z_names == ("z0",)

    def test_arrays_are_read_only(self):
        ds = _tiny()
        with pytest.raises(ValueError):
            ds.y[0] = 10.0

    def test_under_identified_rejected(self):
        with pytest.raises(IdentificationError):
            Dataset(y=[1.0, 2.0], x=np.ones((2, 2)), z=np.ones((2, 1)))

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            Dataset(y=[1.0, np.nan], x=np.ones((2, 1)), z=np.ones((2, 1)))

    def test_row_mismatch_rejected(self):
        with pytest.raises(DataError):
            Dataset(y=[1.0, 2.0, 3.0], x=np.ones((2, 1)), z=np.ones((3, 1)))

    def test_take_keeps_requested_order(self):
        ds = _tiny()
        sub = ds.take([2, 0])
        assert sub.y.tolist() == [3.0, 1.0]


class TestLoadDataset:

    def test_demo_file(self):
        ds, quantile = load_dataset(DEMO_CSV_PATH, "y", ["const", "d", "w1", "dw1"],
                                    ["const", "s", "w1", "sw1"], 0.5)
        assert (ds.n, ds.p, ds.L) == (200, 4, 4)
        assert quantile.tau == 0.5
        assert np.all(ds.x[:, 0] == 1.0)

    def test_column_reused_as_regressor_and_instrument(self, write_csv):
        path = write_csv("y,x\n1,1\n2,2\n3,4\n")
        ds, _ = load_dataset(path, "y", ["x"], ["x"], 0.5)
        assert np.array_equal(ds.x[:, 0], ds.z[:, 0])

    def test_missing_column(self, write_csv):
        path = write_csv("y,x\n1,1\n")
        with pytest.raises(MissingColumnError) as info:
            load_dataset(path, "y", ["x"], ["w"], 0.5)
        assert info.value.details['column'] == "w"
        assert info.value.exit_code == 3

    def test_unparseable_cell_reports_row_and_column(self, write_csv):
        path = write_csv("y,x\n1,1\n2,abc\n")
        with pytest.raises(CellParseError) as info:
            load_dataset(path, "y", ["x"], ["x"], 0.5)
        assert info.value.details['row'] == 2
        assert info.value.details['column'] == "x"

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.csv", "y", ["x"], ["x"], 0.5)

    def test_empty_role_list(self, write_csv):
        path = write_csv("y,x\n1,1\n")
        with pytest.raises(ConfigError):
            load_dataset(path, "y", [], ["x"], 0.5)


class TestMomentModel:

    def test_hand_computed_moment(self):
        model = MomentModel(_tiny(), 0.5)
        beta = np.array([2.0])
        assert model.indicators(beta).tolist() == [True, True, False]
        assert model.sample_moment(beta)[0] == pytest.approx(2 / 3 - 0.5)
        assert moment_sup_norm(model, beta) == pytest.approx(1 / 6)

    def test_tie_counts_as_below(self):
        model = MomentModel(_tiny(), 0.5)
        assert model.indicators(np.array([1.0])).tolist() == [True, False, False]

    def test_contribution_row(self):
        model = MomentModel(_tiny(), 0.25)
        g = moment_contribution(model, 2, np.array([2.0]))
        assert g.tolist() == [-0.25]

    def test_derivative_family_has_no_offset(self):
        model = MomentModel(_tiny(), 0.5, family="derivative")
        assert model.family is MomentFamily.DERIVATIVE
        assert model.tau_offset == 0.0
        assert model.sample_moment(np.array([2.0]))[0] == pytest.approx(2 / 3)

    def test_censored_family_uses_max_with_censoring(self):
        ds = _tiny(censoring=[2.5, 0.0, 0.0])
        model = MomentModel(ds, 0.5, family="censored-ivqr")
        # Y_0 = 1 <= max(0, 2.5)
        assert model.indicators(np.array([0.0])).tolist() == [True, False, False]

    def test_censored_family_requires_censoring(self):
        with pytest.raises(DataError):
            MomentModel(_tiny(), 0.5, family="censored-ivqr")

    def test_custom_family(self):
        ds = _tiny()
        model = MomentModel(ds, 0.5, family="custom",
                            contribution_fn=lambda b: (ds.y - b[0])[:, None])
        assert model.sample_moment(np.array([2.0]))[0] == pytest.approx(0.0)

    def test_sample_moment_exact_under_cancellation(self):
        ones = np.ones((4, 1))
        g = np.array([[1e16], [1.0], [-1e16], [1.0]])
        ds = Dataset(y=np.zeros(4), x=ones, z=ones)
        model = MomentModel(ds, 0.5, family="custom", contribution_fn=lambda b: g)
        assert model.sample_moment(np.zeros(1))[0] == 0.5
        reordered = MomentModel(ds, 0.5, family="custom", contribution_fn=lambda b: g[[3, 0, 1, 2]])
        assert reordered.sample_moment(np.zeros(1))[0] == 0.5

    def test_custom_family_requires_function(self):
        with pytest.raises(ConfigError):
            MomentModel(_tiny(), 0.5, family="custom")

    def test_wrong_beta_length(self):
        with pytest.raises(ConfigError):
            MomentModel(_tiny(), 0.5).sample_moment(np.array([1.0, 2.0]))


class TestStandardize:

    def test_block_second_moment_becomes_identity(self, jtpa_small):
        ds, _ = jtpa_small
        intercept = detect_intercept_column(ds.z)
        assert intercept == 0
        out, record = standardize_instruments(ds, intercept_column=intercept)
        block = out.z[:, record.block_columns]
        np.testing.assert_allclose(block.T @ block / out.n, np.eye(len(record.block_columns)), atol=1e-10)
        np.testing.assert_array_equal(out.z[:, 0], ds.z[:, 0])
        np.testing.assert_array_equal(out.x, ds.x)

    def test_no_intercept_column(self):
        z = np.array([[1.0, 2.0], [0.0, 2.0], [1.0, 3.0]])
        assert detect_intercept_column(z) is None

    def test_rank_deficient_block(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=50)
        ds = Dataset(y=rng.normal(size=50), x=np.ones((50, 1)),
                     z=np.column_stack([np.ones(50), w, 2 * w]))
        with pytest.raises(SingularityError):
            standardize_instruments(ds, intercept_column=0)
