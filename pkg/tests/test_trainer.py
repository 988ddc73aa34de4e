"""Training loop: loop structure, determinism, model selection, divergence."""

from __future__ import annotations

import numpy as np
import pytest

from fusionbench import (CurveLog, Dataset, DivergenceError, MlpParams,
                         SplitMix64, TEXT_DIM, TrainConfig, derive_seed,
                         evaluate, feature_matrix, forward, init_params,
                         modality_dim, mse_loss, stratified_split, train)
from fusionbench.feature_store import DatasetSplit
from fusionbench.trainer import _DROPOUT_STREAM, _INIT_STREAM, _SHUFFLE_STREAM

from benchlib import make_record, random_dataset
from test_mlp import zero_params

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


def quick_config(**overrides) -> TrainConfig:
    values = dict(modality="text", batch_size=4, epochs=3, seed=5)
    values.update(overrides)
    return TrainConfig(**values)


def constant_label_dataset(n0: int, n1: int) -> Dataset:
    """Vectors carry the label in every coordinate; OCR empty."""
    records = [make_record(f"c0-{i:03d}", 0, text_fill=0.0, image_fill=0.0)
               for i in range(n0)]
    records += [make_record(f"c1-{i:03d}", 1, text_fill=1.0, image_fill=1.0)
                for i in range(n1)]
    return Dataset(records=tuple(records), provenance="constant-label")


def first_coordinate_net(input_dim: int) -> MlpParams:
    """Hand-built net computing score = x[0] exactly (identity through two

    ReLUs for non-negative inputs)."""
    w1 = np.zeros((input_dim, 4))
    w1[0, 0] = 1.0
    w2 = np.zeros((4, 3))
    w2[0, 0] = 1.0
    w3 = np.zeros((3, 1))
    w3[0, 0] = 1.0
    return MlpParams(w1=w1, b1=np.zeros(4), w2=w2, b2=np.zeros(3),
                     w3=w3, b3=0.0)


class TestEvaluate:
    def test_zero_net_predicts_all_negative(self):
        ds = random_dataset(66, 34, seed=3)
        params = zero_params(input_dim=modality_dim("text"))
        loss, acc, scores = evaluate(params, ds, ds.ids(), "text")
        assert np.all(scores == 0.0)
        # Score 0 is below threshold, so every prediction is class 0.
        assert acc == 0.66
        assert loss == 0.34

    def test_constant_half_score_ties_go_positive(self):
        ds = random_dataset(6, 4, seed=9)
        params = zero_params(input_dim=modality_dim("image"))
        params = MlpParams(w1=params.w1, b1=params.b1, w2=params.w2,
                           b2=params.b2, w3=params.w3, b3=0.5)
        _, acc, scores = evaluate(params, ds, ds.ids(), "image")
        assert np.all(scores == 0.5)
        assert acc == 0.4  # everything predicted hateful
        _, acc_higher, _ = evaluate(params, ds, ds.ids(), "image",
                                    threshold=0.6)
        assert acc_higher == 0.6

    def test_hand_built_perfect_net(self):
        ds = constant_label_dataset(5, 3)
        params = first_coordinate_net(modality_dim("text"))
        loss, acc, scores = evaluate(params, ds, ds.ids(), "text")
        assert loss == 0.0
        assert acc == 1.0
        assert scores.tolist() == [0.0] * 5 + [1.0] * 3

    def test_scores_follow_id_order(self):
        ds = constant_label_dataset(2, 2)
        params = first_coordinate_net(modality_dim("text"))
        _, _, scores = evaluate(params, ds,
                                ["c1-000", "c0-000", "c1-001"], "text")
        assert scores.tolist() == [1.0, 0.0, 1.0]


class TestLoopStructure:
    def test_curve_shapes_and_step_numbering(self):
        ds = random_dataset(6, 4, seed=17)
        split = stratified_split(ds, 0.8, seed=1)  # 8 train / 2 val
        cfg = quick_config(batch_size=3, epochs=2)
        result = train(ds, split, cfg)
        # 8 train rows in batches of 3 -> 3 batches per epoch, 2 epochs.
        assert [i for i, _ in result.curves.train_loss] == list(range(6))
        assert [e for e, _ in result.curves.val_loss] == [1, 2]
        assert [e for e, _ in result.curves.val_accuracy] == [1, 2]
        result.curves.validate()

    def test_exact_batch_division(self):
        ds = random_dataset(5, 5, seed=29)
        split = stratified_split(ds, 0.8, seed=1)  # 8 train
        result = train(ds, split, quick_config(batch_size=4, epochs=3))
        assert len(result.curves.train_loss) == 6

    def test_batch_losses_replay_from_streams(self):
        # With a vanishing learning rate the parameters never move, so the
        # recorded batch losses must equal fresh forward passes of the
        # initial weights over the same shuffled batches with the same
        # dropout draws.  This pins the shuffle order, the batching, the
        # stream separation, and the loss bookkeeping all at once.
        ds = random_dataset(7, 5, seed=41)
        split = stratified_split(ds, 0.75, seed=2)  # 9 train / 3 val
        cfg = quick_config(batch_size=4, epochs=2, lr=1e-30)
        result = train(ds, split, cfg)

        params0 = init_params(modality_dim(cfg.modality),
                              derive_seed(cfg.seed, _INIT_STREAM))
        dropout_rng = SplitMix64(derive_seed(cfg.seed, _DROPOUT_STREAM))
        x_train, y_train = feature_matrix(ds, split.train_ids, cfg.modality)
        expected = []
        for epoch in (1, 2):
            order = list(range(len(split.train_ids)))
            SplitMix64(derive_seed(cfg.seed, _SHUFFLE_STREAM, epoch)).shuffle(order)
            for start in range(0, len(order), cfg.batch_size):
                rows = order[start:start + cfg.batch_size]
                scores, _ = forward(params0, x_train[rows], "train",
                                    dropout_rng, keep=cfg.dropout_keep)
                expected.append(mse_loss(scores, y_train[rows]))
        recorded = [loss for _, loss in result.curves.train_loss]
        assert np.allclose(recorded, expected, rtol=0, atol=1e-9)
        assert recorded[0] == expected[0]  # epoch 1 batch 0 is exact

    def test_epochs_shuffle_differently(self):
        cfg = quick_config()
        orders = []
        for epoch in (1, 2):
            order = list(range(40))
            SplitMix64(derive_seed(cfg.seed, _SHUFFLE_STREAM, epoch)).shuffle(order)
            orders.append(order)
        assert orders[0] != orders[1]


class TestDeterminismAndSelection:
    def test_bitwise_reproducible(self):
        ds = random_dataset(8, 6, seed=53)
        split = stratified_split(ds, 0.7, seed=3)
        a = train(ds, split, quick_config())
        b = train(ds, split, quick_config())
        for name in PARAM_NAMES:
            assert np.array_equal(np.asarray(getattr(a.params, name)),
                                  np.asarray(getattr(b.params, name)))
        assert a.curves.train_loss == b.curves.train_loss
        assert a.curves.val_accuracy == b.curves.val_accuracy
        assert a.best_epoch == b.best_epoch

    def test_seed_changes_the_run(self):
        ds = random_dataset(8, 6, seed=53)
        split = stratified_split(ds, 0.7, seed=3)
        a = train(ds, split, quick_config(seed=5))
        b = train(ds, split, quick_config(seed=6))
        assert a.curves.train_loss != b.curves.train_loss

    def test_best_params_match_best_accuracy(self):
        ds = random_dataset(10, 8, seed=61)
        split = stratified_split(ds, 0.7, seed=4)
        cfg = quick_config(epochs=5)
        result = train(ds, split, cfg)
        accs = [acc for _, acc in result.curves.val_accuracy]
        assert result.best_accuracy == max(accs)
        # Earliest epoch achieving the max wins.
        assert result.best_epoch == accs.index(max(accs)) + 1
        _, acc, _ = evaluate(result.best_params, ds, split.val_ids,
                             cfg.modality, cfg.threshold)
        assert acc == result.best_accuracy

    def test_final_params_are_last_epoch(self):
        ds = random_dataset(6, 6, seed=71)
        split = stratified_split(ds, 0.5, seed=5)
        result = train(ds, split, quick_config(epochs=1, batch_size=100))
        # One epoch: best and final coincide.
        for name in PARAM_NAMES:
            assert np.array_equal(np.asarray(getattr(result.params, name)),
                                  np.asarray(getattr(result.best_params, name)))
        assert result.best_epoch == 1
        assert result.final_adam_state.t == 1

    def test_single_class_train_set_runs(self):
        ds = constant_label_dataset(0, 6)
        ids = ds.ids()
        split = DatasetSplit(train_ids=tuple(ids[:4]), val_ids=tuple(ids[4:]),
                             seed=0, train_fraction=0.67)
        result = train(ds, split, quick_config(epochs=2, batch_size=2))
        assert len(result.curves.val_accuracy) == 2
        for _, acc in result.curves.val_accuracy:
            assert acc in (0.0, 1.0)  # all-hateful validation side


class TestValidationAndDivergence:
    def test_split_must_match_dataset(self):
        ds = random_dataset(4, 4, seed=5)
        split = stratified_split(ds, 0.5, seed=1)
        foreign = DatasetSplit(train_ids=split.train_ids[:-1] + ("ghost",),
                               val_ids=split.val_ids, seed=1,
                               train_fraction=0.5)
        with pytest.raises(ValueError, match="ghost"):
            train(ds, foreign, quick_config())

    def test_empty_sides_rejected(self):
        ds = random_dataset(3, 3, seed=5)
        ids = ds.ids()
        with pytest.raises(ValueError, match="train"):
            train(ds, DatasetSplit(train_ids=(), val_ids=tuple(ids), seed=1,
                                   train_fraction=0.0), quick_config())
        with pytest.raises(ValueError, match="validation"):
            train(ds, DatasetSplit(train_ids=tuple(ids), val_ids=(), seed=1,
                                   train_fraction=1.0), quick_config())

    def test_huge_lr_diverges(self):
        ds = random_dataset(2, 2, seed=77)
        split = stratified_split(ds, 0.5, seed=1)
        with pytest.raises(DivergenceError):
            train(ds, split, quick_config(batch_size=2, epochs=3, lr=1e200))

    def test_divergence_is_a_runtime_error(self):
        assert issubclass(DivergenceError, RuntimeError)


class TestTrainConfig:
    def test_round_trip(self):
        cfg = TrainConfig(modality="image", batch_size=7, epochs=2, lr=0.01,
                          seed=9)
        assert TrainConfig.from_json_dict(cfg.to_json_dict()) == cfg

    def test_unknown_keys_rejected(self):
        obj = TrainConfig().to_json_dict()
        obj["momentum"] = 0.9
        with pytest.raises(ValueError, match="momentum"):
            TrainConfig.from_json_dict(obj)

    def test_field_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(modality="audio")
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(dropout_keep=0.0)

    def test_defaults_match_documented_recipe(self):
        cfg = TrainConfig()
        assert cfg.batch_size == 25
        assert cfg.epochs == 100
        assert cfg.lr == 0.1
        assert cfg.dropout_keep == 0.8
        assert cfg.modality == "multimodal"
        assert cfg.threshold == 0.5


class TestCurveLog:
    def test_json_round_trip(self, tmp_path):
        curves = CurveLog(train_loss=[(0, 0.5), (1, 0.4)],
                          val_loss=[(1, 0.45)], val_accuracy=[(1, 0.7)])
        curves.save_json(tmp_path / "curves.json")
        import json
        loaded = CurveLog.from_json_dict(
            json.loads((tmp_path / "curves.json").read_text()))
        assert loaded == curves

    def test_csv_output(self, tmp_path):
        curves = CurveLog(train_loss=[(0, 0.5)], val_loss=[(1, 0.25)],
                          val_accuracy=[(1, 0.75)])
        curves.write_csv(tmp_path)
        assert (tmp_path / "train_loss.csv").read_text() == "batch,loss\n0,0.5\n"
        assert (tmp_path / "val_loss.csv").read_text() == "epoch,loss\n1,0.25\n"
        assert (tmp_path / "val_accuracy.csv").read_text() \
            == "epoch,accuracy\n1,0.75\n"

    def test_validate_rejects_regressing_steps(self):
        with pytest.raises(ValueError, match="increasing"):
            CurveLog(train_loss=[(1, 0.5), (1, 0.4)]).validate()
        with pytest.raises(ValueError, match="increasing"):
            CurveLog(val_loss=[(2, 0.5), (1, 0.4)]).validate()

    def test_validate_rejects_negative_losses(self):
        with pytest.raises(ValueError):
            CurveLog(train_loss=[(0, -0.1)]).validate()
