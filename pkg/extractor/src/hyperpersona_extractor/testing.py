"""Helpers for exercising the extractor without downloaded weights."""

from __future__ import annotations

from pathlib import Path

VOCAB_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def make_tiny_model(
    out_dir: str | Path,
    hidden_size: int = 32,
    num_layers: int = 4,
    max_positions: int = 64,
    seed: int = 0,
) -> Path:
    """Save a small randomly-initialized bidirectional encoder plus a
    character-level wordpiece vocab; loadable via AutoModel/AutoTokenizer.

    Random weights exercise layer averaging, pooling and chunking exactly
    like a real checkpoint, with determinism fixed by the seed.
    """
    import torch
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    letters = [chr(c) for c in range(ord("a"), ord("z") + 1)]
    vocab_list = VOCAB_SPECIALS + letters + ["##" + ch for ch in letters]
    vocab = {token: i for i, token in enumerate(vocab_list)}

    wordpiece = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    wordpiece.normalizer = normalizers.BertNormalizer(lowercase=True)
    wordpiece.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    wordpiece.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=wordpiece, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )
    tokenizer.save_pretrained(out_dir)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=4,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=max_positions,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(out_dir)
    return out_dir
