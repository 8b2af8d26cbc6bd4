"""Decoder-only transformer over cell tokens: training and sampling."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from . import tensor as T
from .grid import GridConfig, Point
from .greedy import greedy_saturate
from .lines import LineTable
from .tensor import Tensor, UsageError


@dataclass
class ModelConfig:
    n: int
    layers: int = 2
    heads: int = 2
    dim: int = 32
    ff_dim: int | None = None
    temperature: float = 1.0
    init_seed: int = 0

    def __post_init__(self):
        if self.ff_dim is None:
            self.ff_dim = 4 * self.dim
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} is not divisible by heads {self.heads}")

    @property
    def vocab(self) -> int:
        return self.n * self.n + 1

    @property
    def start_token(self) -> int:
        return self.n * self.n

    @property
    def max_len(self) -> int:
        return 2 * self.n + 1

    @classmethod
    def full_scale(cls, n: int, **kw) -> "ModelConfig":
        return cls(n, layers=4, heads=4, dim=64, ff_dim=256, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d = cfg.dim
        self.heads = cfg.heads
        self.ln1 = nn.LayerNorm(d)
        self.q = nn.Linear(d, d, rng, std=0.02)
        self.k = nn.Linear(d, d, rng, std=0.02)
        self.v = nn.Linear(d, d, rng, std=0.02)
        self.proj = nn.Linear(d, d, rng, std=0.02)
        self.ln2 = nn.LayerNorm(d)
        self.fc = nn.Linear(d, cfg.ff_dim, rng, std=0.02)
        self.out = nn.Linear(cfg.ff_dim, d, rng, std=0.02)

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return x.reshape(b, t, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def attend(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        y = T.causal_attention(self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x)))
        return self.proj(y.transpose(0, 2, 1, 3).reshape(b, t, d))

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attend(self.ln1(x))
        return x + self.out(T.gelu(self.fc(self.ln2(x))))


class Transformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        rng = np.random.default_rng(cfg.init_seed)
        self.cfg = cfg
        self.tok = nn.Embedding(cfg.vocab, cfg.dim, rng)
        self.pos = nn.Embedding(cfg.max_len, cfg.dim, rng)
        self.blocks = [Block(cfg, rng) for _ in range(cfg.layers)]
        self.ln_f = nn.LayerNorm(cfg.dim)
        self.head = nn.Linear(cfg.dim, cfg.vocab, rng, std=0.02)

    def __call__(self, idx) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        t = idx.shape[1]
        if t > self.cfg.max_len:
            raise ValueError(f"sequence length {t} exceeds max_len {self.cfg.max_len}")
        x = self.tok(idx) + self.pos(np.arange(t))
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))


# -- batches -------------------------------------------------------------------------

@dataclass
class TrainBatch:
    tokens: np.ndarray   # (batch, max_len) start token, sequence, padding
    inputs: np.ndarray   # tokens[:, :-1]
    targets: np.ndarray  # tokens[:, 1:]
    mask: np.ndarray     # True where the target is a real token


def make_batch(seqs: list[list[int]], cfg: ModelConfig) -> TrainBatch:
    tokens = np.full((len(seqs), cfg.max_len), cfg.start_token, dtype=np.int64)
    mask = np.zeros((len(seqs), cfg.max_len - 1), dtype=bool)
    for i, s in enumerate(seqs):
        if len(s) > cfg.max_len - 1:
            raise ValueError(f"sequence of length {len(s)} exceeds {cfg.max_len - 1} tokens")
        tokens[i, 1:1 + len(s)] = s
        mask[i, :len(s)] = True
    return TrainBatch(tokens, tokens[:, :-1], tokens[:, 1:], mask)


def batch_loss(model: Transformer, batch: TrainBatch) -> Tensor:
    return T.cross_entropy(model(batch.inputs), batch.targets, batch.mask)


def eval_loss(model: Transformer, seqs: list[list[int]], chunk: int = 512) -> float:
    total, count = 0.0, 0
    with T.no_grad():
        for i in range(0, len(seqs), chunk):
            b = make_batch(seqs[i:i + chunk], model.cfg)
            k = int(b.mask.sum())
            total += batch_loss(model, b).item() * k
            count += k
    return total / max(count, 1)


# -- training ------------------------------------------------------------------------

@dataclass
class TrainingLog:
    """Row ``(step, train_loss, test_loss)``: the train loss of the update that
    completed ``step`` updates, and the held-out loss measured after it (if
    evaluated). The first row holds the held-out loss before training."""

    rows: list[tuple[int, float | None, float | None]] = field(default_factory=list)

    def add(self, step: int, train_loss: float | None, test_loss: float | None = None) -> None:
        self.rows.append((step, train_loss, test_loss))

    @property
    def train_losses(self) -> list[float]:
        return [r[1] for r in self.rows if r[1] is not None]

    @property
    def test_losses(self) -> list[tuple[int, float]]:
        return [(r[0], r[2]) for r in self.rows if r[2] is not None]

    def extend(self, other: "TrainingLog") -> None:
        self.rows.extend(other.rows)

    def write_csv(self, path, append: bool = False) -> None:
        with open(path, "a" if append else "w", newline="") as f:
            w = csv.writer(f)
            if not append or f.tell() == 0:
                w.writerow(["step", "train_loss", "test_loss"])
            for step, tr, te in self.rows:
                w.writerow([step, "" if tr is None else repr(tr), "" if te is None else repr(te)])


def split_holdout(data: list, fraction: float, seed: int) -> tuple[list, list]:
    if len(data) < 10 or fraction <= 0:
        return list(data), list(data)
    order = np.random.default_rng(seed).permutation(len(data))
    k = max(1, int(round(len(data) * fraction)))
    return [data[i] for i in order[k:]], [data[i] for i in order[:k]]


def train_steps(model: Transformer, data: list[list[int]], steps: int, seed: int,
                batch_size: int = 32, lr: float = 1e-3, weight_decay: float = 0.1,
                test_data: list[list[int]] | None = None, holdout: float = 0.1,
                eval_every: int = 100, eval_size: int = 512,
                optimizer: nn.Adam | None = None, step_offset: int = 0) -> TrainingLog:
    """Run ``steps`` AdamW steps on random batches drawn from ``data``.

    Held-out loss is logged before the first step and every ``eval_every``
    steps. When ``test_data`` is not given a seeded ``holdout`` fraction of
    ``data`` is set aside.
    """
    if not data:
        raise UsageError("train_steps() needs a non-empty dataset")
    rng = np.random.default_rng(seed)
    if test_data is None:
        train, test = split_holdout(data, holdout, seed)
    else:
        train, test = list(data), list(test_data)
    if len(test) > eval_size:
        test = [test[i] for i in rng.choice(len(test), eval_size, replace=False)]
    if optimizer is None:
        optimizer = nn.AdamW(model.parameters(), lr=lr, weight_decay=weight_decay)
    log = TrainingLog()
    log.add(step_offset, None, eval_loss(model, test))
    for i in range(steps):
        picks = rng.integers(len(train), size=batch_size)
        batch = make_batch([train[j] for j in picks], model.cfg)
        optimizer.zero_grad()
        loss = batch_loss(model, batch)
        loss.backward()
        optimizer.step()
        done = i + 1
        test_loss = eval_loss(model, test) if done % eval_every == 0 or done == steps else None
        log.add(step_offset + done, loss.item(), test_loss)
    return log


# -- sampling ------------------------------------------------------------------------

def sample(model: Transformer, count: int, seed: int, temperature: float | None = None,
           chunk: int = 1024) -> list[list[int]]:
    """Autoregressive samples of 2n grid tokens each. The start token is never
    emitted; temperature <= 1e-6 means argmax decoding."""
    cfg = model.cfg
    temperature = cfg.temperature if temperature is None else temperature
    rng = np.random.default_rng(seed)
    length = cfg.max_len - 1
    # drawn up front so results do not depend on the chunk size
    uniforms = rng.random((count, length))
    out: list[list[int]] = []
    with T.no_grad():
        for lo in range(0, count, chunk):
            b = min(chunk, count - lo)
            idx = np.full((b, 1), cfg.start_token, dtype=np.int64)
            for step in range(length):
                logits = model(idx).data[:, -1, :].copy()
                logits[:, cfg.start_token] = -np.inf
                if temperature <= 1e-6:
                    nxt = logits.argmax(axis=1)
                else:
                    z = logits / temperature
                    z -= z.max(axis=1, keepdims=True)
                    p = np.exp(z)
                    p /= p.sum(axis=1, keepdims=True)
                    u = uniforms[lo:lo + b, step, None]
                    nxt = np.minimum((p.cumsum(axis=1) < u).sum(axis=1), cfg.vocab - 2)
                idx = np.concatenate([idx, nxt[:, None]], axis=1)
            out.extend(row[1:].tolist() for row in idx)
    return out


def decode_and_repair(seq: list[int], table: LineTable, rng_seed: int = 0) -> GridConfig:
    """Place tokens in order, skipping repeats and any token that would put a
    third point on a line, then greedily saturate."""
    n = table.n
    counts = [0] * len(table.lines)
    config = GridConfig(n)
    for t in seq:
        t = int(t)
        if not 0 <= t < n * n:
            continue
        p = Point(t // n, t % n)
        hit = table.cell_to_lines[t]
        if p in config or any(counts[i] >= 2 for i in hit):
            continue
        config.add(p)
        for i in hit:
            counts[i] += 1
    return greedy_saturate(config, table, rng_seed)


def initial_loss_reference(cfg: ModelConfig) -> float:
    return math.log(cfg.vocab)
