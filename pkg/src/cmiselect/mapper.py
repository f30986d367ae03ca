"""Learned per-feature maps with a shared surrogate head.

Each feature block X_i is mapped by its own dense network f_i to a
low-dimensional representation. A single head network models the
conditional law of the target given the masked concatenation of all
mapped blocks (block-dropout) plus the mask bits. Training maximizes
the masked log-likelihood minus an information-efficiency regularizer
that matches squared map distances to Jeffreys divergences.
"""

import json
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from . import autodiff
from .autodiff import Tensor
from .nn_core import Adam, DenseNet

LOG_2PI = np.log(2.0 * np.pi)
LOGVAR_CLAMP = 10.0


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.1
    batch_size: int = 256
    iterations: int = 5000
    delta: int = 0
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lam < 0 or self.delta < 0:
            raise ValueError("lam and delta must be non-negative")


def sample_mask(m, delta, rng):
    """Uniform draw over binary vectors with 1..delta+1 ones."""
    return sample_masks(m, delta, 1, rng)[0]


def sample_masks(m, delta, count, rng):
    """Draw `count` block-dropout masks, shape (count, m)."""
    max_ones = delta + 1
    if max_ones > m:
        warnings.warn(f"delta+1={max_ones} exceeds m={m}; clamping to m")
        max_ones = m
    if max_ones < 1:
        raise ValueError("delta must be >= 0")
    weights = np.array([comb(m, c) for c in range(1, max_ones + 1)], dtype=np.float64)
    probs = weights / weights.sum()
    counts = rng.choice(np.arange(1, max_ones + 1), size=count, p=probs)
    masks = np.zeros((count, m), dtype=np.int64)
    for row, c in enumerate(counts):
        masks[row, rng.choice(m, size=c, replace=False)] = 1
    return masks


class MappingModel:
    """m per-feature map networks plus one shared surrogate head."""

    def __init__(self, feature_dims, map_dim=1, head_kind="gaussian", delta=0,
                 map_hidden=32, head_hidden=64, seed=0):
        if head_kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown head_kind {head_kind!r}")
        self.feature_dims = list(feature_dims)
        self.m = len(self.feature_dims)
        self.map_dim = map_dim
        self.head_kind = head_kind
        self.delta = delta
        # single-feature MI estimation skips masking entirely
        self.use_mask = self.m > 1
        rng = np.random.default_rng(seed)
        self.map_nets = [
            DenseNet([d, map_hidden, map_hidden, map_dim], rng=rng)
            for d in self.feature_dims
        ]
        head_in = self.m * map_dim + (self.m if self.use_mask else 0)
        head_out = 2 if head_kind == "gaussian" else 1
        self.head_net = DenseNet([head_in, head_hidden, head_hidden, head_out], rng=rng)
        self.trained_lambda = None

    @property
    def mask_max_ones(self):
        return min(self.delta + 1, self.m)

    def map_features(self, blocks):
        """Apply each f_i to its block; returns a list of (n, r) arrays."""
        if len(blocks) != self.m:
            raise ValueError(f"expected {self.m} feature blocks, got {len(blocks)}")
        return [net.forward(np.asarray(b, dtype=np.float64))
                for net, b in zip(self.map_nets, blocks)]

    def _all_params(self):
        params = []
        for net in self.map_nets:
            params.extend(net.parameters())
        params.extend(self.head_net.parameters())
        return params

    # -- checkpointing -------------------------------------------------

    def to_dict(self):
        return {
            "feature_dims": self.feature_dims,
            "map_dim": self.map_dim,
            "head_kind": self.head_kind,
            "delta": self.delta,
            "lambda": self.trained_lambda,
            "map_nets": [net.to_dict() for net in self.map_nets],
            "head_net": self.head_net.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        model = cls.__new__(cls)
        model.feature_dims = list(d["feature_dims"])
        model.m = len(model.feature_dims)
        model.map_dim = int(d["map_dim"])
        model.head_kind = d["head_kind"]
        model.delta = int(d["delta"])
        model.use_mask = model.m > 1
        model.trained_lambda = d.get("lambda")
        model.map_nets = [DenseNet.from_dict(nd) for nd in d["map_nets"]]
        model.head_net = DenseNet.from_dict(d["head_net"])
        return model

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _head_input(model, mapped, masks):
    """Assemble head input from mapped blocks and the 0/1 mask matrix."""
    cols = [blk * masks[:, i:i + 1] for i, blk in enumerate(mapped)]
    if model.use_mask:
        cols.append(masks.astype(np.float64))
    return np.hstack(cols)


def surrogate_forward(model, blocks, mask=None):
    """Distribution parameters of q(Y | masked maps, mask).

    Returns (mean, variance) arrays for a gaussian head or the success
    probability array for a bernoulli head.
    """
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    blocks = [b.reshape(-1, d) for b, d in zip(blocks, model.feature_dims)]
    n = blocks[0].shape[0]
    if mask is None:
        masks = np.ones((n, model.m))
    else:
        masks = np.asarray(mask, dtype=np.float64)
        if masks.ndim == 1:
            masks = np.broadcast_to(masks, (n, model.m)).copy()
    mapped = model.map_features(blocks)
    out = model.head_net.forward(_head_input(model, mapped, masks))
    if model.head_kind == "gaussian":
        mu = out[:, 0]
        logvar = np.clip(out[:, 1], -LOGVAR_CLAMP, LOGVAR_CLAMP)
        return mu, np.exp(logvar)
    logit = out[:, 0]
    return 1.0 / (1.0 + np.exp(-logit))


def log_likelihood(params, y, head_kind=None):
    """Pointwise log-likelihood under gaussian or bernoulli parameters."""
    y = np.asarray(y, dtype=np.float64)
    if head_kind is None:
        head_kind = "gaussian" if isinstance(params, tuple) else "bernoulli"
    if head_kind == "gaussian":
        mu, var = params
        return -0.5 * np.log(2.0 * np.pi * var) - (y - mu) ** 2 / (2.0 * var)
    p = np.clip(np.asarray(params, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    return y * np.log(p) + (1.0 - y) * np.log(1.0 - p)


def jeffreys(params_a, params_b, head_kind=None):
    """Symmetrized KL divergence between two same-family distributions."""
    if head_kind is None:
        head_kind = "gaussian" if isinstance(params_a, tuple) else "bernoulli"
    if head_kind == "gaussian":
        mu_a, var_a = params_a
        mu_b, var_b = params_b
        return (0.25 * (var_a / var_b + var_b / var_a - 2.0)
                + 0.25 * (mu_a - mu_b) ** 2 * (1.0 / var_a + 1.0 / var_b))
    p_a = np.clip(np.asarray(params_a, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    p_b = np.clip(np.asarray(params_b, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    logit = lambda p: np.log(p) - np.log(1.0 - p)
    return 0.5 * (p_a - p_b) * (logit(p_a) - logit(p_b))


# ---------------------------------------------------------------------
# training
# ---------------------------------------------------------------------

def _gaussian_ll_graph(out, y_col):
    mu = out[:, 0:1]
    lv = out[:, 1:2].clip(-LOGVAR_CLAMP, LOGVAR_CLAMP)
    return (-0.5 * LOG_2PI) + (-0.5) * lv + (-0.5) * (y_col - mu).square() * (-lv).exp()


def _bernoulli_ll_graph(out, y_col):
    logit = out[:, 0:1]
    return y_col * logit - logit.softplus()


def _jeffreys_graph(out_a, out_b, head_kind):
    if head_kind == "gaussian":
        mu_a, lv_a = out_a[:, 0:1], out_a[:, 1:2].clip(-LOGVAR_CLAMP, LOGVAR_CLAMP)
        mu_b, lv_b = out_b[:, 0:1], out_b[:, 1:2].clip(-LOGVAR_CLAMP, LOGVAR_CLAMP)
        ratio = (lv_a - lv_b).exp() + (lv_b - lv_a).exp() - 2.0
        prec = (-lv_a).exp() + (-lv_b).exp()
        return 0.25 * ratio + 0.25 * (mu_a - mu_b).square() * prec
    la, lb = out_a[:, 0:1], out_b[:, 0:1]
    return 0.5 * (la.sigmoid() - lb.sigmoid()) * (la - lb)


def objective_graph(model, y_batch, blocks_batch, masks, shuffles, lam):
    """Differentiable training objective J for one batch.

    Returns (J, likelihood value, regularizer value, param tensors).
    The parameter tensor list is ordered as `model._all_params()`.
    """
    nb = y_batch.shape[0]
    y_col = Tensor(np.asarray(y_batch, dtype=np.float64).reshape(nb, 1))
    masks_f = masks.astype(np.float64)

    param_tensors = []
    map_pts = []
    for net in model.map_nets:
        pts = net.param_tensors()
        map_pts.append(pts)
        param_tensors.extend(pts)
    head_pts = model.head_net.param_tensors()
    param_tensors.extend(head_pts)

    mapped = [net.apply(Tensor(blk), pts)
              for net, blk, pts in zip(model.map_nets, blocks_batch, map_pts)]
    masked = [mapped[i] * masks_f[:, i:i + 1] for i in range(model.m)]
    head_cols = list(masked)
    if model.use_mask:
        head_cols.append(Tensor(masks_f))
    out = model.head_net.apply(autodiff.concat(head_cols, axis=1), head_pts)

    if model.head_kind == "gaussian":
        ll = _gaussian_ll_graph(out, y_col)
    else:
        ll = _bernoulli_ll_graph(out, y_col)
    likelihood = ll.mean()
    objective = likelihood

    regularizer = None
    if lam > 0:
        for i in range(model.m):
            idx = shuffles[i]
            mapped_shuf = model.map_nets[i].apply(
                Tensor(blocks_batch[i][idx]), map_pts[i])
            cols = list(masked)
            cols[i] = mapped_shuf * masks_f[:, i:i + 1]
            if model.use_mask:
                cols.append(Tensor(masks_f))
            out_shuf = model.head_net.apply(autodiff.concat(cols, axis=1), head_pts)
            div = _jeffreys_graph(out, out_shuf, model.head_kind)
            dist = (mapped[i] - mapped_shuf).square().sum(axis=1, keepdims=True)
            term = ((dist - div).abs() * masks_f[:, i:i + 1]).mean()
            regularizer = term if regularizer is None else regularizer + term
        objective = objective - lam * regularizer

    return objective, likelihood, regularizer, param_tensors


def train(model, dataset, cfg=TrainConfig()):
    """Run the block-dropout likelihood/regularizer ascent; returns loss history."""
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    if dataset.feature_dims != model.feature_dims:
        raise ValueError(
            f"dataset dims {dataset.feature_dims} != model dims {model.feature_dims}")
    rng = np.random.default_rng(cfg.seed)
    params = model._all_params()
    opt = Adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    n = dataset.n
    nb = min(cfg.batch_size, n)
    history = []
    for it in range(cfg.iterations):
        idx = rng.choice(n, size=nb, replace=False)
        blocks_batch = [b[idx] for b in dataset.blocks]
        y_batch = dataset.y[idx]
        if model.use_mask:
            masks = sample_masks(model.m, cfg.delta, nb, rng)
        else:
            masks = np.ones((nb, 1), dtype=np.int64)
        shuffles = [rng.permutation(nb) for _ in range(model.m)]
        obj, like, reg, pts = objective_graph(
            model, y_batch, blocks_batch, masks, shuffles, cfg.lam)
        value = float(obj.data)
        if not np.isfinite(value):
            like_v = float(like.data)
            reg_v = float(reg.data) if reg is not None else 0.0
            raise RuntimeError(
                f"non-finite objective at iteration {it} "
                f"(likelihood={like_v}, regularizer={reg_v})")
        obj.backward(np.ones(()))
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in pts]
        opt.step(grads, maximize=True)
        history.append(-value)
    model.trained_lambda = cfg.lam
    return history
