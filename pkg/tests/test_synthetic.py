"""Generator determinism and the separation calibration it promises."""

from __future__ import annotations

import numpy as np
import pytest

from fusionbench import (IMAGE_DIM, TEXT_DIM, SyntheticSpec, feature_matrix,
                         generate)


def spec_with(**overrides) -> SyntheticSpec:
    base = dict(n_per_class=30, text_separation=0.5, image_separation=3.0,
                informative_dims_text=8, informative_dims_image=4, seed=7)
    base.update(overrides)
    return SyntheticSpec(**base)


def probe_accuracy(ds, modality: str, ridge: float = 100.0) -> float:
    """Least-squares linear probe fit on even rows, scored on odd rows.

    Centered targets with a mild ridge term keep the fit well-posed when
    the feature dimension exceeds the fit-row count; solved in the dual so
    the system size is the number of fit rows, not the dimension.
    """
    x, y = feature_matrix(ds, ds.ids(), modality)
    fit_rows = np.arange(0, x.shape[0], 2)
    eval_rows = np.arange(1, x.shape[0], 2)
    x_fit, y_fit = x[fit_rows], y[fit_rows]
    x_mean, y_mean = x_fit.mean(axis=0), y_fit.mean()
    x_centered = x_fit - x_mean
    alpha = np.linalg.solve(
        x_centered @ x_centered.T + ridge * np.eye(len(fit_rows)),
        y_fit - y_mean)
    w = x_centered.T @ alpha
    predicted = (x[eval_rows] - x_mean) @ w >= 0.0
    return float(np.mean(predicted == (y[eval_rows] == 1.0)))


class TestSpecValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            spec_with(n_per_class=0)
        with pytest.raises(ValueError):
            spec_with(text_separation=-0.1)
        with pytest.raises(ValueError):
            spec_with(informative_dims_text=TEXT_DIM + 1)
        with pytest.raises(ValueError):
            spec_with(informative_dims_image=-1)

    def test_json_round_trip(self):
        spec = spec_with()
        assert SyntheticSpec.from_json_dict(spec.to_json_dict()) == spec

    def test_json_rejects_unknown_and_missing_keys(self):
        good = spec_with().to_json_dict()
        with pytest.raises(ValueError, match="unknown"):
            SyntheticSpec.from_json_dict({**good, "extra": 1})
        bad = dict(good)
        del bad["seed"]
        with pytest.raises(ValueError, match="missing"):
            SyntheticSpec.from_json_dict(bad)


class TestGenerate:
    def test_shape_and_balance(self):
        ds = generate(spec_with(n_per_class=30))
        assert len(ds) == 60
        assert ds.class_counts() == (30, 30)
        rec = ds.records[0]
        assert rec.text_vec.shape == (TEXT_DIM,)
        assert rec.image_vec.shape == (IMAGE_DIM,)
        assert rec.text_vec.dtype == np.float32

    def test_ids_are_unique_and_ordered_by_class(self):
        ds = generate(spec_with(n_per_class=3))
        assert ds.ids() == ("synth-0-00000", "synth-0-00001", "synth-0-00002",
                            "synth-1-00000", "synth-1-00001", "synth-1-00002")
        assert [r.label for r in ds.records] == [0, 0, 0, 1, 1, 1]

    def test_same_spec_twice_identical(self):
        assert generate(spec_with()) == generate(spec_with())

    def test_distinct_seeds_differ(self):
        a = generate(spec_with(seed=1))
        b = generate(spec_with(seed=2))
        assert a != b

    def test_provenance_describes_generator(self):
        assert "synthetic" in generate(spec_with()).provenance

    def test_zero_separation_is_null(self):
        ds = generate(spec_with(n_per_class=200, text_separation=0.0,
                                image_separation=0.0))
        x, y = feature_matrix(ds, ds.ids(), "multimodal")
        mean_gap = x[y == 1].mean(axis=0) - x[y == 0].mean(axis=0)
        # No informative signal: the average class-mean gap is pure noise.
        assert abs(mean_gap.mean()) < 0.01
        assert probe_accuracy(ds, "multimodal") < 0.65

    def test_mean_separation_within_20_percent(self):
        spec = spec_with(n_per_class=2000)
        ds = generate(spec)
        for modality, separation, informative in (
                ("text", spec.text_separation, spec.informative_dims_text),
                ("image", spec.image_separation, spec.informative_dims_image)):
            x, y = feature_matrix(ds, ds.ids(), modality)
            gap = x[y == 1].mean(axis=0) - x[y == 0].mean(axis=0)
            observed = gap[:informative].mean()
            assert abs(observed - separation) < 0.2 * separation
            assert abs(gap[informative:].mean()) < 0.01

    def test_image_probe_beats_text_probe(self):
        # text d' ~ 0.5*sqrt(8) = 1.41 vs image d' ~ 3*sqrt(4) = 6: a linear
        # probe must separate image far better than text.
        ds = generate(spec_with(n_per_class=500))
        image_acc = probe_accuracy(ds, "image")
        text_acc = probe_accuracy(ds, "text")
        assert image_acc > text_acc
        assert image_acc - text_acc > 0.05
