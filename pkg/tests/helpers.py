"""Shared oracles for the test-suite."""

import math

import numpy as np


def finite_difference_check(loss_fn, params, eps=1e-4, names=None):
    """Max elementwise relative error of analytic vs central-difference gradients, per tensor.

    ``loss_fn()`` returns ``(loss, grads)`` for the current contents of ``params``.
    """
    _, analytic = loss_fn()
    errors = {}
    for name in names or list(params):
        value = params[name]
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            up, _ = loss_fn()
            value[idx] = orig - eps
            down, _ = loss_fn()
            value[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-6)
        errors[name] = float((np.abs(a - numeric) / denom).max()) if value.size else 0.0
    return errors


def reference_layer(params, ids, n_heads, prefix="layers.0."):
    """One post-norm encoder layer, written as explicit loops in Python floats."""
    tok = params["embeddings.token"]
    pos = params["embeddings.position"]
    T = len(ids)
    H = tok.shape[1]
    dh = H // n_heads

    def vec(name):
        return [float(x) for x in params[prefix + name]]

    def mat(name):
        return [[float(x) for x in row] for row in params[prefix + name]]

    def affine(x, W, b):
        return [sum(x[i] * W[i][j] for i in range(len(x))) + b[j] for j in range(len(b))]

    def norm(x, g, s):
        mu = sum(x) / len(x)
        var = sum((v - mu) ** 2 for v in x) / len(x)
        return [(v - mu) / math.sqrt(var + 1e-12) * g[i] + s[i] for i, v in enumerate(x)]

    def gelu(x):
        return 0.5 * x * (1 + math.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x ** 3)))

    x = [[float(tok[ids[t]][j] + pos[t][j]) for j in range(H)] for t in range(T)]
    q = [affine(r, mat("attention.query.weight"), vec("attention.query.bias")) for r in x]
    k = [affine(r, mat("attention.key.weight"), vec("attention.key.bias")) for r in x]
    v = [affine(r, mat("attention.value.weight"), vec("attention.value.bias")) for r in x]
    ctx = [[0.0] * H for _ in range(T)]
    for h in range(n_heads):
        cols = range(h * dh, (h + 1) * dh)
        for t in range(T):
            s = [sum(q[t][c] * k[u][c] for c in cols) / math.sqrt(dh) for u in range(T)]
            m = max(s)
            e = [math.exp(z - m) for z in s]
            z = sum(e)
            for c in cols:
                ctx[t][c] = sum(e[u] / z * v[u][c] for u in range(T))
    out = []
    for t in range(T):
        a = affine(ctx[t], mat("attention.output.weight"), vec("attention.output.bias"))
        y1 = norm([x[t][j] + a[j] for j in range(H)], vec("attention_norm.scale"), vec("attention_norm.shift"))
        f = [gelu(z) for z in affine(y1, mat("ffn.in.weight"), vec("ffn.in.bias"))]
        f2 = affine(f, mat("ffn.out.weight"), vec("ffn.out.bias"))
        out.append(norm([y1[j] + f2[j] for j in range(H)], vec("ffn_norm.scale"), vec("ffn_norm.shift")))
    return np.array(out)
