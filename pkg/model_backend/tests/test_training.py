import pytest

from model_backend.data import check_lengths, is_hex_payload, read_corpus
from model_backend.errors import BadCorpus, CorpusTooLong
from model_backend.training import TrainConfig, finetune, greedy_decode, load_checkpoint

from corpus_fixtures import echo_corpus, write_corpus


class TestCorpusLoading:
    def test_read_round_trip(self, tmp_path):
        pairs = echo_corpus(5)
        path = write_corpus(tmp_path / "c.csv", pairs)
        assert read_corpus(path) == pairs

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n")
        with pytest.raises(BadCorpus):
            read_corpus(path)

    def test_over_cap_record_names_the_row(self):
        pairs = [("aa", "bb"), ("cc" * 40, "dd")]
        with pytest.raises(CorpusTooLong, match="row 3"):
            check_lengths(pairs, source_cap=16, target_cap=16)

    def test_hex_payload_filter(self):
        assert is_hex_payload("00ff")
        assert not is_hex_payload("00f")      # odd length
        assert not is_hex_payload("00:ff")    # separator is not payload
        assert not is_hex_payload("")


class TestConfigValidation:
    def test_patience_floor(self):
        with pytest.raises(ValueError):
            TrainConfig(patience=0)

    def test_length_caps_floor(self):
        with pytest.raises(ValueError):
            TrainConfig(target_max_token_len=0)


class TestFinetune:
    def _cfg(self, **kwargs):
        base = dict(source_max_token_len=64, target_max_token_len=32,
                    patience=10, max_epochs=5, batch_size=32, seed=0)
        base.update(kwargs)
        return TrainConfig(**base)

    def test_loss_decreases_over_first_epochs(self, tmp_path):
        pairs = echo_corpus(200)
        train_csv = write_corpus(tmp_path / "train.csv", pairs)
        val_csv = write_corpus(tmp_path / "val.csv", echo_corpus(20, tid0=500))
        result = finetune(train_csv, val_csv, self._cfg(), tmp_path / "ckpt")
        losses = [e.train_loss for e in result.epochs]
        assert len(losses) >= 4
        assert all(losses[i + 1] < losses[i] for i in range(3))

    def test_early_stopping_under_patience_rule(self, tmp_path):
        # zero learning rate freezes the model, so validation loss is flat
        # after epoch 1 and the patience rule must fire
        pairs = echo_corpus(40)
        csv = write_corpus(tmp_path / "c.csv", pairs)
        cfg = self._cfg(learning_rate=0.0, patience=2, max_epochs=50)
        result = finetune(csv, csv, cfg, tmp_path / "ckpt")
        assert result.stopped_early
        assert len(result.epochs) == 1 + cfg.patience

    def test_same_seed_reproduces_epoch_one_loss(self, tmp_path):
        pairs = echo_corpus(60)
        csv = write_corpus(tmp_path / "c.csv", pairs)
        losses = []
        for run in range(2):
            result = finetune(csv, csv, self._cfg(max_epochs=1),
                              tmp_path / f"ckpt{run}")
            losses.append(result.epochs[0].train_loss)
        assert losses[0] == losses[1]

    def test_over_cap_corpus_rejected(self, tmp_path):
        pairs = [("aa" * 64, "bb")]
        csv = write_corpus(tmp_path / "c.csv", pairs)
        with pytest.raises(CorpusTooLong):
            finetune(csv, csv, self._cfg(), tmp_path / "ckpt")

    def test_validity_hook_receives_predictions(self, tmp_path):
        pairs = echo_corpus(20)
        csv = write_corpus(tmp_path / "c.csv", pairs)
        calls = []

        def hook(sources, preds):
            calls.append((len(sources), len(preds)))
            return 0.25

        result = finetune(csv, csv, self._cfg(max_epochs=2),
                          tmp_path / "ckpt", validity_hook=hook)
        assert len(calls) == len(result.epochs)
        assert all(e.validity == 0.25 for e in result.epochs)


def test_memorization_reaches_exact_recall(memorized_checkpoint):
    checkpoint_dir, pairs = memorized_checkpoint
    model, tokenizer, cfg = load_checkpoint(checkpoint_dir)
    preds = greedy_decode(model, tokenizer, [s for s, _ in pairs],
                          cfg.target_max_token_len)
    assert preds == [t for _, t in pairs]
