from __future__ import annotations

import json

import numpy as np
import pytest

from taxolm.masking import IGNORE_INDEX, MaskedInstance
from taxolm.model.network import ModelConfig, init_params
from taxolm.model.optim import init_optimizer
from taxolm.model.training import (
    CSV_HEADER,
    PretrainConfig,
    collate,
    load_checkpoint,
    pretrain,
    save_checkpoint,
    train_step,
)
from taxolm.sampler import Relation, SamplerConfig
from taxolm.tokenizer import CLS_ID, PAD_ID, SEP_ID


def _model_config(**kw):
    base = dict(vocab_size=1, max_len=32, layers=1, hidden_dim=16, heads=2, ffn_dim=24)
    base.update(kw)
    return ModelConfig(**base)


def _run_config(**kw):
    base = dict(steps=8, seed=3, batch_size=8, peak_lr=5e-3, log_interval=4, max_len=32)
    base.update(kw)
    return PretrainConfig(**base)


def test_collate_pads_and_aligns():
    a = MaskedInstance(
        input_ids=np.array([CLS_ID, 7, SEP_ID, 8, SEP_ID]),
        mlm_labels=np.array([IGNORE_INDEX, 7, IGNORE_INDEX, IGNORE_INDEX, IGNORE_INDEX]),
        erp_label=Relation.LINKED,
        boundary=3,
    )
    b = MaskedInstance(
        input_ids=np.array([CLS_ID, 9, 10, SEP_ID, 11, 12, SEP_ID]),
        mlm_labels=np.full(7, IGNORE_INDEX),
        erp_label=Relation.RANDOM,
        boundary=4,
    )
    batch = collate([a, b])
    assert batch["input_ids"].shape == (2, 7)
    assert (batch["input_ids"][0, 5:] == PAD_ID).all()
    assert (batch["mlm_labels"][0, 5:] == IGNORE_INDEX).all()
    assert batch["erp_labels"].tolist() == [1, 0]


def test_train_step_updates_and_logs(rich_store):
    config = _model_config(vocab_size=64)
    params = init_params(config, np.random.default_rng(0))
    state = init_optimizer(params, peak_lr=1e-3, total_steps=4)
    ids = np.array([[CLS_ID, 7, 8, SEP_ID, 9, 10, SEP_ID]])
    labels = np.where(np.asarray([[0, 1, 0, 0, 1, 0, 0]]) == 1, ids, IGNORE_INDEX)
    batch = {"input_ids": ids, "mlm_labels": labels, "erp_labels": np.array([2])}
    before = params["tok_emb"].copy()
    logs = train_step(params, state, config, batch)
    assert logs["step"] == 1
    assert np.isfinite(logs["loss"])
    assert logs["loss"] == logs["mlm_loss"] + logs["erp_loss"]
    assert (params["tok_emb"] != before).any()


def test_single_step_run_has_one_record(rich_store, tmp_path):
    run = _run_config(steps=1, log_interval=50)
    result = pretrain(rich_store, SamplerConfig(seed=3), _model_config(), run, str(tmp_path / "run"))
    assert len(result.history) == 1
    row = result.history[0]
    assert row["step"] == 1
    for key in ("train_loss", "dev_loss", "mlm_acc", "erp_acc"):
        assert np.isfinite(row[key])
    text = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert len(text) == 2


def test_rerun_same_seed_reproduces_csv_bytes(rich_store, tmp_path):
    run = _run_config()
    pretrain(rich_store, SamplerConfig(seed=3), _model_config(), run, str(tmp_path / "a"))
    pretrain(rich_store, SamplerConfig(seed=3), _model_config(), run, str(tmp_path / "b"))
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    other = pretrain(rich_store, SamplerConfig(seed=4), _model_config(), _run_config(seed=4), str(tmp_path / "c"))
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "c" / "metrics.csv").read_bytes()
    assert other.history


def test_resume_reproduces_trajectory_bit_for_bit(rich_store, tmp_path):
    model_config = _model_config()
    sampler_config = SamplerConfig(seed=9)
    run = _run_config(steps=12, seed=9, log_interval=4)

    continuous = pretrain(rich_store, sampler_config, model_config, run, str(tmp_path / "full"))
    halted = pretrain(
        rich_store, sampler_config, model_config, run, str(tmp_path / "part"), halt_after=8
    )
    assert [r["step"] for r in halted.history] == [4, 8]
    resumed = pretrain(
        rich_store,
        sampler_config,
        model_config,
        run,
        str(tmp_path / "resumed"),
        resume_from=str(tmp_path / "part" / "checkpoint.npz"),
    )
    assert [r["step"] for r in resumed.history] == [12]

    full_rows = (tmp_path / "full" / "metrics.csv").read_text().splitlines()
    part_rows = (tmp_path / "part" / "metrics.csv").read_text().splitlines()
    resumed_rows = (tmp_path / "resumed" / "metrics.csv").read_text().splitlines()
    assert part_rows[1:] == full_rows[1:3]
    assert resumed_rows[1:] == full_rows[3:]
    # final parameters identical as well
    full_ck, _, _, _, _ = load_checkpoint(str(tmp_path / "full" / "checkpoint.npz"))
    res_ck, _, _, _, _ = load_checkpoint(str(tmp_path / "resumed" / "checkpoint.npz"))
    for name in full_ck:
        assert (full_ck[name] == res_ck[name]).all(), name


def test_resume_validation_errors(rich_store, tmp_path):
    model_config = _model_config()
    run = _run_config(steps=8, log_interval=4)
    pretrain(rich_store, SamplerConfig(seed=3), model_config, run, str(tmp_path / "base"))
    ckpt = str(tmp_path / "base" / "checkpoint.npz")
    with pytest.raises(ValueError, match="steps"):
        pretrain(
            rich_store,
            SamplerConfig(seed=3),
            model_config,
            _run_config(steps=20, log_interval=4),
            str(tmp_path / "bad"),
            resume_from=ckpt,
        )
    with pytest.raises(ValueError, match="config"):
        pretrain(
            rich_store,
            SamplerConfig(seed=3),
            _model_config(hidden_dim=32),
            run,
            str(tmp_path / "bad2"),
            resume_from=ckpt,
        )


def test_checkpoint_round_trip(tmp_path):
    config = _model_config(vocab_size=11)
    params = init_params(config, np.random.default_rng(1))
    state = init_optimizer(params, peak_lr=2e-3, total_steps=7, weight_decay=0.05)
    state.step = 3
    from taxolm.tokenizer import Vocab

    tokens = ("<cls>", "<sep>", "<pad>", "<mask>", "<unk>", "alpha", "beta")
    vocab = Vocab(id_to_token=tokens, token_to_id={t: i for i, t in enumerate(tokens)})
    rng = np.random.default_rng(0)
    rng_states = {"train_sample": rng.bit_generator.state, "train_mask": rng.bit_generator.state}
    path = str(tmp_path / "ck.npz")
    save_checkpoint(path, params, state, config, vocab, rng_states)
    params2, state2, config2, vocab2, rng2 = load_checkpoint(path)
    assert config2 == config
    assert vocab2 == vocab
    assert state2.step == 3
    assert state2.weight_decay == 0.05
    assert rng2["train_sample"] == rng_states["train_sample"]
    for name in params:
        assert (params2[name] == params[name]).all()
        assert (state2.m[name] == state.m[name]).all()


def test_dev_split_size_and_summary(rich_store, tmp_path):
    run = _run_config(steps=4, batch_size=16, dev_fraction=0.05, log_interval=2)
    result = pretrain(rich_store, SamplerConfig(seed=5), _model_config(), run, str(tmp_path / "d"))
    summary = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert summary["dev_instances"] == max(1, round(0.05 * 4 * 16))
    assert summary["final"]["step"] == 4
    assert len(summary["history"]) == 2
    by_rel = result.final["erp_acc_by_relation"]
    assert set(by_rel) == {"random", "linked", "grouped"}


def test_run_config_validation():
    with pytest.raises(ValueError):
        _run_config(steps=0)
    with pytest.raises(ValueError):
        _run_config(dev_fraction=0.0)
    with pytest.raises(ValueError):
        _run_config(log_interval=0)
