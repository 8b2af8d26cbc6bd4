"""Layers, optimizers and checkpoints on top of :mod:`n3l.tensor`."""

from __future__ import annotations

import json
import math

import numpy as np

from . import tensor as T
from .tensor import Tensor, UsageError

CHECKPOINT_VERSION = 1


class Parameter(Tensor):
    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable


class Module:
    def named_parameters(self, prefix: str = "") -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Parameter):
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
        for name, p in out.items():
            p.name = name
        return out

    def parameters(self) -> list[Parameter]:
        return [p for p in self.named_parameters().values() if p.trainable]

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=p.data.dtype)
            if arr.shape != p.shape:
                raise ValueError(f"parameter {k}: shape {arr.shape} != expected {p.shape}")
            p.data = arr.copy()


class Linear(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator,
                 std: float | None = None, bias: bool = True):
        std = 1.0 / math.sqrt(fan_in) if std is None else std
        self.weight = Parameter(rng.normal(0.0, std, (fan_in, fan_out)))
        self.bias = Parameter(np.zeros(fan_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.weight, self.bias, self.eps)


class Embedding(Module):
    def __init__(self, count: int, dim: int, rng: np.random.Generator, std: float = 0.02):
        self.weight = Parameter(rng.normal(0.0, std, (count, dim)))

    def __call__(self, idx) -> Tensor:
        return T.embedding(self.weight, idx)


class MLP(Module):
    """ReLU multilayer perceptron with scaled-normal init."""

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = T.relu(layer(x))
        return x


# -- optimizers --------------------------------------------------------------------

class Adam:
    """Adam; with ``weight_decay`` > 0 it is AdamW (decoupled decay)."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise UsageError(f"parameter {p.name or '?'} has no gradient; call backward() first")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data = p.data - self.lr * update

    def state_dict(self) -> dict:
        return {
            "t": self.t, "lr": self.lr, "betas": [self.beta1, self.beta2],
            "eps": self.eps, "weight_decay": self.weight_decay,
            "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v],
        }

    def load_state_dict(self, state: dict) -> None:
        if len(state["m"]) != len(self.params):
            raise ValueError("optimizer state does not match parameter count")
        for p, m in zip(self.params, state["m"]):
            if np.shape(m) != p.shape:
                raise ValueError(f"optimizer moment shape {np.shape(m)} != parameter {p.shape}")
        self.t = int(state["t"])
        self.lr = float(state["lr"])
        self.beta1, self.beta2 = state["betas"]
        self.eps = float(state["eps"])
        self.weight_decay = float(state["weight_decay"])
        self.m = [np.asarray(m, dtype=p.data.dtype).copy() for p, m in zip(self.params, state["m"])]
        self.v = [np.asarray(v, dtype=p.data.dtype).copy() for p, v in zip(self.params, state["v"])]


def AdamW(params, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8,
          weight_decay: float = 0.1) -> Adam:
    return Adam(params, lr, betas, eps, weight_decay)


def adam_step(optimizer: Adam) -> None:
    optimizer.step()


adamw_step = adam_step


def step_decay(lr0: float, step: int, interval: int, factor: float = 0.8) -> float:
    """lr0 * factor ** floor(step / interval)."""
    return lr0 * factor ** (step // interval)


def clip_grad_norm(params: list[Parameter], max_norm: float) -> float:
    total = math.sqrt(sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total


# -- checkpoints ---------------------------------------------------------------------

def _pack(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    return {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}


def _unpack(rec: dict) -> np.ndarray:
    return np.asarray(rec["values"], dtype=np.float64).reshape(rec["shape"])


def save_checkpoint(path, model: Module, optimizer: Adam | None = None, meta: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "params": {k: _pack(v) for k, v in model.state_dict().items()},
    }
    if optimizer is not None:
        st = optimizer.state_dict()
        st["m"] = [_pack(m) for m in st["m"]]
        st["v"] = [_pack(v) for v in st["v"]]
        doc["optimizer"] = st
    with open(path, "w") as f:
        json.dump(doc, f)


class CheckpointError(ValueError):
    pass


def read_checkpoint(path) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from None
    if not isinstance(doc, dict) or doc.get("version") != CHECKPOINT_VERSION or "params" not in doc:
        raise CheckpointError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    return doc


def load_checkpoint(path, model: Module, optimizer: Adam | None = None) -> dict:
    """Load parameters (and optimizer state if present and requested); returns meta."""
    doc = read_checkpoint(path)
    try:
        model.load_state_dict({k: _unpack(v) for k, v in doc["params"].items()})
        if optimizer is not None and "optimizer" in doc:
            st = dict(doc["optimizer"])
            st["m"] = [_unpack(m) for m in st["m"]]
            st["v"] = [_unpack(v) for v in st["v"]]
            optimizer.load_state_dict(st)
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"{path}: {e}") from None
    return doc.get("meta", {})
