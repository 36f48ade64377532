"""LSTM-based medical history encoder over four item channels.

Each channel holds up to 8 prior-encounter item sets, oldest first.  A
timestep is the normalized multi-hot of that encounter's items; sequences
shorter than 8 are left-padded with zero timesteps, so an empty channel is
the rollout on all-zero inputs.  Channel outputs are concatenated.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .layers import LSTM, Dense
from ..worldgen import HISTORY_CHANNELS

MAX_STEPS = 8


class HistoryLengthError(ValueError):
    """A channel exceeded the 8-encounter contract; callers must truncate."""


@dataclass
class HistoryVocab:
    """Per-channel item index, restricted to items above a frequency floor."""

    channels: dict[str, dict[str, int]]

    @classmethod
    def build(cls, histories: Iterable[dict], min_count: int = 5) -> "HistoryVocab":
        counts: dict[str, Counter] = {ch: Counter() for ch in HISTORY_CHANNELS}
        for history in histories:
            for ch in HISTORY_CHANNELS:
                for entry in history.get(ch, []):
                    items = entry["items"] if isinstance(entry, dict) else entry.items
                    for item in items:
                        counts[ch][item] += 1
        channels = {}
        for ch in HISTORY_CHANNELS:
            kept = sorted(i for i, c in counts[ch].items() if c >= min_count)
            channels[ch] = {item: j for j, item in enumerate(kept)}
        return cls(channels)

    def sizes(self) -> dict[str, int]:
        return {ch: max(1, len(v)) for ch, v in self.channels.items()}

    def to_dict(self) -> dict:
        return {"channels": self.channels}

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryVocab":
        return cls({ch: dict(v) for ch, v in d["channels"].items()})


def encode_history_channels(history: Optional[dict], vocab: HistoryVocab) -> dict[str, np.ndarray]:
    """One observation -> per-channel (8, vocab) arrays, left-padded."""
    out = {}
    history = history or {}
    for ch in HISTORY_CHANNELS:
        size = max(1, len(vocab.channels[ch]))
        arr = np.zeros((MAX_STEPS, size))
        entries = list(history.get(ch, []))
        if len(entries) > MAX_STEPS:
            raise HistoryLengthError(
                f"channel {ch!r} has {len(entries)} entries (max {MAX_STEPS})"
            )
        offset = MAX_STEPS - len(entries)
        index = vocab.channels[ch]
        for t, entry in enumerate(entries):
            items = entry["items"] if isinstance(entry, dict) else entry.items
            hits = [index[i] for i in items if i in index]
            if hits:
                arr[offset + t, hits] = 1.0 / len(hits)
        out[ch] = arr
    return out


def encode_history_batch(histories: list, vocab: HistoryVocab) -> dict[str, np.ndarray]:
    per = [encode_history_channels(h, vocab) for h in histories]
    return {
        ch: np.stack([p[ch] for p in per]) if per else np.zeros((0, MAX_STEPS, 1))
        for ch in HISTORY_CHANNELS
    }


class HistoryEncoder:
    def __init__(
        self,
        vocab: HistoryVocab,
        embed_dim: int = 16,
        hidden_dim: int = 16,
        rng: Optional[np.random.Generator] = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.vocab = vocab
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        sizes = vocab.sizes()
        self.embed = {ch: Dense(sizes[ch], embed_dim, rng, bias=False) for ch in HISTORY_CHANNELS}
        self.lstm = {ch: LSTM(embed_dim, hidden_dim, rng) for ch in HISTORY_CHANNELS}

    @property
    def output_dim(self) -> int:
        return len(HISTORY_CHANNELS) * self.hidden_dim

    def forward(self, channels: dict[str, np.ndarray]) -> np.ndarray:
        outs = []
        self._shapes = {}
        for ch in HISTORY_CHANNELS:
            x = channels[ch]  # (n, 8, V)
            n, steps, v = x.shape
            self._shapes[ch] = (n, steps, v)
            emb = self.embed[ch].forward(x.reshape(n * steps, v)).reshape(
                n, steps, self.embed_dim
            )
            outs.append(self.lstm[ch].forward(emb))
        return np.concatenate(outs, axis=1)

    def backward(self, grad: np.ndarray) -> None:
        h = self.hidden_dim
        for k, ch in enumerate(HISTORY_CHANNELS):
            g = grad[:, k * h : (k + 1) * h]
            demb = self.lstm[ch].backward(g)
            n, steps, v = self._shapes[ch]
            self.embed[ch].backward(demb.reshape(n * steps, self.embed_dim))

    def params(self, prefix: str = "hist") -> dict[str, np.ndarray]:
        out = {}
        for ch in HISTORY_CHANNELS:
            out.update(self.embed[ch].params(f"{prefix}.{ch}.embed"))
            out.update(self.lstm[ch].params(f"{prefix}.{ch}.lstm"))
        return out

    def grads(self, prefix: str = "hist") -> dict[str, np.ndarray]:
        out = {}
        for ch in HISTORY_CHANNELS:
            out.update(self.embed[ch].grads(f"{prefix}.{ch}.embed"))
            out.update(self.lstm[ch].grads(f"{prefix}.{ch}.lstm"))
        return out

    def zero_grad(self) -> None:
        for ch in HISTORY_CHANNELS:
            self.embed[ch].zero_grad()
            self.lstm[ch].zero_grad()
