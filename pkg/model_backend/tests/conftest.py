import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus_fixtures import read_reply_corpus, write_corpus  # noqa: E402

from model_backend.training import TrainConfig, finetune  # noqa: E402


@pytest.fixture(scope="session")
def memorized_checkpoint(tmp_path_factory):
    """A checkpoint trained to byte-exact recall of the 10-pair corpus."""
    root = tmp_path_factory.mktemp("memorized")
    pairs = read_reply_corpus()
    train_csv = write_corpus(root / "train.csv", pairs)
    cfg = TrainConfig(source_max_token_len=64, target_max_token_len=32,
                      patience=200, max_epochs=1500, batch_size=10,
                      learning_rate=5e-4, seed=0, target_bca=1.0)
    result = finetune(train_csv, train_csv, cfg, root / "ckpt")
    assert result.epochs[-1].bca == 1.0, "memorization run did not converge"
    return root / "ckpt", pairs
