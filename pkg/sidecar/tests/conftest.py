"""Tiny real-architecture models for offline testing.

Randomly initialized (fixed seeds) BERT and GPT-2 checkpoints over a small
multilingual vocabulary, saved through the normal transformers machinery so
sessions load them exactly like full-size checkpoints.
"""

import pytest
import torch
from transformers import (
    BertConfig,
    BertForPreTraining,
    BertTokenizer,
    GPT2Config,
    GPT2LMHeadModel,
)

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    # english
    "the", "cat", "dog", "sat", "on", "a", "mat", "ran", "slept",
    # german
    "der", "die", "hund", "katze", "schlief", "lief",
    # spanish
    "el", "la", "perro", "gato", "corre",
    # french
    "le", "chat", "chien", "dort",
    # punctuation and pieces
    ".", ",", "!", "?", "##s", "##e", "##en",
]


def _write_vocab(directory):
    path = directory / "vocab.txt"
    path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def masked_model_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tiny-masked")
    tokenizer = BertTokenizer(_write_vocab(directory), do_lower_case=True)
    torch.manual_seed(7)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=48,
        pad_token_id=0,
    )
    model = BertForPreTraining(config)
    tokenizer.save_pretrained(directory)
    model.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def causal_model_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tiny-causal")
    tokenizer = BertTokenizer(_write_vocab(directory), do_lower_case=True)
    torch.manual_seed(11)
    config = GPT2Config(
        vocab_size=len(VOCAB),
        n_embd=32,
        n_layer=2,
        n_head=2,
        n_positions=48,
        bos_token_id=2,
        eos_token_id=3,
    )
    model = GPT2LMHeadModel(config)
    tokenizer.save_pretrained(directory)
    model.save_pretrained(directory)
    return str(directory)
