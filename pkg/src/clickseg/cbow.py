"""From-scratch CBOW model over activity sequences.

The model predicts a center token from the mean of its context embeddings
through a full softmax over the vocabulary. Training sequences contain an
explicit boundary token between concatenated traces, so the trained model
can score how likely a case boundary is at any gap of a user stream: the
boundary score of a gap is the predicted probability of the boundary token
given the activities around the gap.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ModelFormatError, TrainingDataError, UnknownTokenError
from .log_ingest import UserStream

BOUNDARY_TOKEN = "■"
BOUNDARY_INDEX = 0
MODEL_FORMAT_VERSION = 1


class Vocabulary:
    """Dense token index with the boundary token fixed at index 0."""

    def __init__(self, tokens: Sequence[str]):
        if not tokens or tokens[0] != BOUNDARY_TOKEN:
            raise ValueError(f"tokens must start with the boundary token {BOUNDARY_TOKEN!r}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self._tokens = tuple(tokens)
        self._index = {token: i for i, token in enumerate(self._tokens)}

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]]) -> "Vocabulary":
        labels = sorted({t for seq in sequences for t in seq} - {BOUNDARY_TOKEN})
        return cls([BOUNDARY_TOKEN, *labels])

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownTokenError(token) from None

    def get(self, token: str, default: int = -1) -> int:
        return self._index.get(token, default)

    def token(self, index: int) -> str:
        return self._tokens[index]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._tokens == other._tokens


def build_vocab(sequences: Iterable[Sequence[str]]) -> Vocabulary:
    return Vocabulary.from_sequences(sequences)


@dataclass(frozen=True, slots=True)
class TrainConfig:
    embedding_dim: int = 32
    window_radius: int = 1
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.window_radius < 1:
            raise ConfigError(f"window_radius must be >= 1, got {self.window_radius}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 < self.min_learning_rate <= self.learning_rate:
            raise ConfigError("need 0 < min_learning_rate <= learning_rate")


class CbowModel:
    """Trained (or freshly initialized) CBOW model.

    ``input_embeddings`` is |V| x d, ``output_weights`` is d x |V|; prediction
    is softmax(mean(input rows of the context) @ output_weights).
    """

    def __init__(
        self,
        vocab: Vocabulary,
        input_embeddings: np.ndarray,
        output_weights: np.ndarray,
        window_radius: int,
        epoch_losses: Sequence[float] = (),
    ):
        v, d = input_embeddings.shape
        if v != len(vocab) or output_weights.shape != (d, v):
            raise ValueError("weight shapes inconsistent with vocabulary")
        self.vocab = vocab
        self.input_embeddings = input_embeddings
        self.output_weights = output_weights
        self.window_radius = window_radius
        self.epoch_losses = list(epoch_losses)

    @property
    def embedding_dim(self) -> int:
        return self.input_embeddings.shape[1]

    def predict_center(self, context: Sequence[str]) -> np.ndarray:
        """Probability distribution over the vocabulary for the token between
        the given context tokens."""
        if not context:
            raise ValueError("context must be non-empty")
        idx = [self.vocab.index(t) for t in context]
        hidden = self.input_embeddings[idx].mean(axis=0)
        return _softmax(hidden @ self.output_weights)


def predict_center(model: CbowModel, context: Sequence[str]) -> np.ndarray:
    return model.predict_center(context)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _forward_backward(
    w_in: np.ndarray,
    w_out: np.ndarray,
    context: np.ndarray,
    center: int,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy loss for one window and its gradients w.r.t. both
    matrices. The SGD loop applies exactly these gradients, so the finite
    difference check on this function covers training too."""
    hidden = w_in[context].mean(axis=0)
    probs = _softmax(hidden @ w_out)
    loss = -float(np.log(probs[center]))
    dlogits = probs.copy()
    dlogits[center] -= 1.0
    grad_out = np.outer(hidden, dlogits)
    dhidden = w_out @ dlogits
    grad_in = np.zeros_like(w_in)
    np.add.at(grad_in, context, dhidden / len(context))
    return loss, grad_in, grad_out


def _training_windows(
    sequences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    radius: int,
) -> tuple[np.ndarray, np.ndarray]:
    """All full windows of every sequence as (contexts, centers) index arrays.

    Only positions with ``radius`` tokens on each side form a window, so all
    context rows have the same width 2*radius.
    """
    contexts: list[list[int]] = []
    centers: list[int] = []
    for seq in sequences:
        if len(seq) < 2 * radius + 1:
            continue
        idx = [vocab.index(t) for t in seq]
        for c in range(radius, len(idx) - radius):
            contexts.append(idx[c - radius : c] + idx[c + 1 : c + radius + 1])
            centers.append(idx[c])
    if not contexts:
        return np.empty((0, 2 * radius), dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.asarray(contexts, dtype=np.int64), np.asarray(centers, dtype=np.int64)


def init_model(vocab: Vocabulary, config: TrainConfig) -> CbowModel:
    """Random input embeddings in (-0.5/d, 0.5/d), zero output weights."""
    rng = np.random.default_rng(config.seed)
    d = config.embedding_dim
    w_in = (rng.random((len(vocab), d)) - 0.5) / d
    w_out = np.zeros((d, len(vocab)))
    return CbowModel(vocab, w_in, w_out, config.window_radius)


def train(
    config: TrainConfig,
    sequences: Sequence[Sequence[str]],
    *,
    counters: Counter | None = None,
) -> CbowModel:
    """Train one model by per-window SGD, deterministic given the seed.

    Windows are visited in sequence order each epoch; the learning rate
    decays linearly from learning_rate to min_learning_rate over all steps.
    """
    counters = counters if counters is not None else Counter()
    vocab = build_vocab(sequences)
    model = init_model(vocab, config)
    contexts, centers = _training_windows(sequences, vocab, config.window_radius)
    if len(centers) == 0:
        raise TrainingDataError(
            f"no sequence is long enough for a full window of radius {config.window_radius}"
        )
    w_in, w_out = model.input_embeddings, model.output_weights
    total_steps = config.epochs * len(centers)
    lr_span = config.learning_rate - config.min_learning_rate
    step = 0
    for _ in range(config.epochs):
        epoch_loss = 0.0
        for context, center in zip(contexts, centers):
            lr = config.learning_rate - lr_span * (step / max(total_steps - 1, 1))
            loss, grad_in, grad_out = _forward_backward(w_in, w_out, context, int(center))
            w_in -= lr * grad_in
            w_out -= lr * grad_out
            epoch_loss += loss
            step += 1
        model.epoch_losses.append(epoch_loss / len(centers))
    counters["training_windows"] += len(centers)
    if not (np.isfinite(w_in).all() and np.isfinite(w_out).all()):
        raise TrainingDataError("training diverged: non-finite weights")
    return model


def train_ensemble(
    config: TrainConfig,
    sequences: Sequence[Sequence[str]],
    size: int = 1,
    *,
    threads: int = 1,
    counters: Counter | None = None,
) -> list[CbowModel]:
    """Train ``size`` models differing only by seed (config.seed + member index)."""
    if size < 1:
        raise ConfigError(f"ensemble size must be >= 1, got {size}")
    configs = [
        TrainConfig(
            embedding_dim=config.embedding_dim,
            window_radius=config.window_radius,
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            min_learning_rate=config.min_learning_rate,
            seed=config.seed + member,
        )
        for member in range(size)
    ]
    if threads > 1 and size > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: train(c, sequences, counters=counters), configs))
    return [train(c, sequences, counters=counters) for c in configs]


def _gap_contexts(
    activity_indices: np.ndarray,
    radius: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Context token indices for every gap of a stream.

    Gap g (1-based, between events g and g+1) takes the ``radius`` activities
    on each side, truncated at the edges. Returns a (gaps, 2*radius) index
    matrix and a same-shape validity mask; unknown activities (index < 0)
    are masked out.
    """
    n = len(activity_indices)
    offsets = np.arange(-radius, radius)  # positions relative to the gap's right event
    positions = np.arange(1, n)[:, None] + offsets[None, :]
    in_range = (positions >= 0) & (positions < n)
    tokens = np.where(in_range, activity_indices[np.clip(positions, 0, n - 1)], -1)
    return tokens, tokens >= 0


def boundary_scores(
    models: CbowModel | Sequence[CbowModel],
    stream: UserStream | Sequence[str],
    aggregation: str = "mean",
    *,
    counters: Counter | None = None,
) -> np.ndarray:
    """Boundary-token probability at every gap between consecutive events.

    A stream of n events yields n-1 scores. Unknown activities contribute
    nothing to a context; a gap whose whole context is unknown scores 0.
    Scores from ensemble members are combined with the mean or the median.
    """
    counters = counters if counters is not None else Counter()
    if aggregation not in ("mean", "median"):
        raise ConfigError(f"unknown aggregation: {aggregation!r} (expected 'mean' or 'median')")
    if isinstance(models, CbowModel):
        models = [models]
    if not models:
        raise ConfigError("need at least one model")
    vocab = models[0].vocab
    radius = models[0].window_radius
    for m in models[1:]:
        if m.vocab != vocab or m.window_radius != radius:
            raise ConfigError("ensemble members disagree on vocabulary or window radius")

    activities = stream.activities() if isinstance(stream, UserStream) else list(stream)
    if len(activities) < 2:
        return np.zeros(0)
    indices = np.asarray([vocab.get(a, -1) for a in activities], dtype=np.int64)
    unknown = int((indices < 0).sum())
    if unknown:
        counters["unknown_activities"] += unknown
    tokens, known = _gap_contexts(indices, radius)
    counts = known.sum(axis=1)
    scoreable = counts > 0
    counters["unknown_context_gaps"] += int((~scoreable).sum())

    per_model = np.zeros((len(models), len(tokens)))
    safe_tokens = np.clip(tokens, 0, None)
    for row, model in enumerate(models):
        summed = (model.input_embeddings[safe_tokens] * known[..., None]).sum(axis=1)
        hidden = summed[scoreable] / counts[scoreable, None]
        probs = _softmax(hidden @ model.output_weights)
        per_model[row, scoreable] = probs[:, BOUNDARY_INDEX]
    if aggregation == "mean":
        return per_model.mean(axis=0)
    return np.median(per_model, axis=0)


def save_model(model: CbowModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "window_radius": model.window_radius,
        "tokens": list(model.vocab.tokens),
        "input_embeddings": model.input_embeddings.tolist(),
        "output_weights": model.output_weights.tolist(),
        "epoch_losses": model.epoch_losses,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_model(path: str | Path) -> CbowModel:
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not a valid model file: {exc}") from exc
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model format version {version!r} (expected {MODEL_FORMAT_VERSION})"
        )
    try:
        vocab = Vocabulary(payload["tokens"])
        w_in = np.asarray(payload["input_embeddings"], dtype=float)
        w_out = np.asarray(payload["output_weights"], dtype=float)
        model = CbowModel(vocab, w_in, w_out, int(payload["window_radius"]), payload.get("epoch_losses", []))
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed model file: {exc}") from exc
    return model
