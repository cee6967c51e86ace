"""Token-classification model and its on-disk artifact format.

A compact transformer encoder trained from scratch over a corpus-derived
word vocabulary. The `base_model` identifier selects a built-in
architecture preset ("builtin:small", "builtin:tiny") or points at a saved
model directory to continue from. Pretrained-hub checkpoints are out of
reach in offline environments, which this adapter is built for.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .data import TAGS

PRESETS = {
    "builtin:small": dict(dim=64, layers=2, heads=4, ff_dim=128, dropout=0.1, max_len=128),
    "builtin:tiny": dict(dim=32, layers=1, heads=2, ff_dim=64, dropout=0.0, max_len=128),
}

WEIGHTS_NAME = "weights.pt"
VOCAB_NAME = "vocab.json"
CONFIG_NAME = "model_config.json"


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    layers: int
    heads: int
    ff_dim: int
    dropout: float
    max_len: int


class TokenTagger(nn.Module):
    def __init__(self, vocab_size: int, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.embedding = nn.Embedding(vocab_size, spec.dim, padding_idx=0)
        self.positions = nn.Embedding(spec.max_len, spec.dim)
        layer = nn.TransformerEncoderLayer(
            d_model=spec.dim, nhead=spec.heads, dim_feedforward=spec.ff_dim,
            dropout=spec.dropout, batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=spec.layers,
                                             enable_nested_tensor=False)
        self.classifier = nn.Linear(spec.dim, len(TAGS))

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        """ids, pad_mask: (batch, seq); returns logits (batch, seq, tags)."""
        seq_len = ids.shape[1]
        positions = torch.arange(seq_len, device=ids.device).unsqueeze(0)
        hidden = self.embedding(ids) + self.positions(positions)
        encoded = self.encoder(hidden, src_key_padding_mask=pad_mask)
        return self.classifier(encoded)


def resolve_spec(base_model: str) -> ModelSpec:
    if base_model in PRESETS:
        return ModelSpec(**PRESETS[base_model])
    config_path = Path(base_model) / CONFIG_NAME
    if config_path.exists():
        with open(config_path, encoding="utf-8") as fh:
            return ModelSpec(**json.load(fh)["spec"])
    raise ValueError(
        f"unknown base model {base_model!r}: expected one of {sorted(PRESETS)} "
        "or a saved model directory"
    )


def save_model(model: TokenTagger, vocab: dict[str, int], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / WEIGHTS_NAME)
    with open(out / VOCAB_NAME, "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, ensure_ascii=False)
    with open(out / CONFIG_NAME, "w", encoding="utf-8") as fh:
        json.dump({"spec": asdict(model.spec), "tags": list(TAGS)}, fh, indent=2)


def load_model(model_dir: str | Path) -> tuple[TokenTagger, dict[str, int]]:
    model_dir = Path(model_dir)
    for name in (WEIGHTS_NAME, VOCAB_NAME, CONFIG_NAME):
        if not (model_dir / name).exists():
            raise FileNotFoundError(f"model artifact incomplete: missing {model_dir / name}")
    with open(model_dir / CONFIG_NAME, encoding="utf-8") as fh:
        spec = ModelSpec(**json.load(fh)["spec"])
    with open(model_dir / VOCAB_NAME, encoding="utf-8") as fh:
        vocab = json.load(fh)
    model = TokenTagger(vocab_size=len(vocab), spec=spec)
    model.load_state_dict(torch.load(model_dir / WEIGHTS_NAME, weights_only=True))
    model.eval()
    return model, vocab
