import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB_WORDS = [f"tok{i}" for i in range(50)] + ["synthetic", "document", "number"]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """A local 768-hidden single-layer encoder with a word-level vocab."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    ckpt = tmp_path_factory.mktemp("checkpoint")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + VOCAB_WORDS
    (ckpt / "vocab.txt").write_text("\n".join(vocab), encoding="utf-8")
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=768, num_hidden_layers=1,
        num_attention_heads=4, intermediate_size=256, max_position_embeddings=512,
    )
    torch.manual_seed(1234)
    BertModel(config).save_pretrained(ckpt)
    BertTokenizerFast(vocab_file=str(ckpt / "vocab.txt")).save_pretrained(ckpt)
    return str(ckpt)
