"""Gradient-check cases shared by the unit tests and the acceptance suite."""

import numpy as np

from n3l import tensor as T

_MASK = np.array([[True, False, True, True], [False, True, True, False], [True, True, False, True]])
_IDX = np.array([[0, 3, 1], [2, 2, 4]])
_TARGETS = np.array([[1, 0, 4], [3, 3, 2]])
_TMASK = np.array([[True, True, False], [True, False, True]])


def _positive(shape):
    return lambda rng: rng.uniform(0.5, 2.0, shape)


def _normal(shape):
    return lambda rng: rng.normal(size=shape)


# name -> (build, input generators)
OP_CASES = {
    "add_broadcast": (lambda a, b: a + b, [_normal((3, 4)), _normal((4,))]),
    "sub": (lambda a, b: a - b, [_normal((3, 4)), _normal((3, 1))]),
    "mul_broadcast": (lambda a, b: a * b, [_normal((2, 3, 4)), _normal((3, 1))]),
    "div": (lambda a, b: a / b, [_normal((3, 4)), _positive((3, 4))]),
    "neg": (lambda a: -a, [_normal((5,))]),
    "pow": (lambda a: a ** 3.0, [_normal((3, 4))]),
    "exp": (T.exp, [_normal((3, 4))]),
    "log": (T.log, [_positive((3, 4))]),
    "tanh": (T.tanh, [_normal((3, 4))]),
    "relu": (T.relu, [_normal((3, 4))]),
    "gelu": (T.gelu, [_normal((3, 4))]),
    "where": (lambda a: T.where(_MASK, a, -2.0), [_normal((3, 4))]),
    "reshape": (lambda a: a.reshape(4, 3) * np.arange(12.0).reshape(4, 3), [_normal((3, 4))]),
    "transpose": (lambda a: a.transpose(2, 0, 1), [_normal((2, 3, 4))]),
    "swapaxes": (lambda a: T.swapaxes(a, -1, -2), [_normal((2, 3, 4))]),
    "getitem": (lambda a: a[1:, ::2], [_normal((3, 4))]),
    "concat": (lambda a, b: T.concat([a, b], axis=-1), [_normal((2, 3)), _normal((2, 2))]),
    "sum_axis": (lambda a: a.sum(axis=1, keepdims=True), [_normal((3, 4))]),
    "mean": (lambda a: a.mean(axis=0), [_normal((3, 4))]),
    "matmul": (lambda a, b: a @ b, [_normal((3, 4)), _normal((4, 2))]),
    "matmul_batched": (lambda a, b: a @ b, [_normal((2, 3, 4)), _normal((4, 5))]),
    "softmax": (lambda a: T.softmax(a, axis=-1), [_normal((3, 5))]),
    "log_softmax": (lambda a: T.log_softmax(a, axis=-1), [_normal((3, 5))]),
    "layer_norm": (lambda x, w, b: T.layer_norm(x, w, b), [_normal((2, 3, 6)), _normal((6,)), _normal((6,))]),
    "embedding": (lambda w: T.embedding(w, _IDX), [_normal((5, 3))]),
    "take_last": (lambda a: T.take_last(a, _IDX % 4), [_normal((2, 3, 4))]),
    "cross_entropy": (lambda a: T.cross_entropy(a, _TARGETS), [_normal((2, 3, 5))]),
    "cross_entropy_masked": (lambda a: T.cross_entropy(a, _TARGETS, _TMASK), [_normal((2, 3, 5))]),
    "causal_attention": (T.causal_attention, [_normal((2, 2, 4, 3))] * 3),
}


def make_inputs(name, seed):
    _, gens = OP_CASES[name]
    rng = np.random.default_rng(seed)
    return [g(rng) for g in gens]
