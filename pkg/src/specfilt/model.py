"""Differentiable spectral-filter classifier.

Forward pass: a small MLP transforms node features, then the filter bank
is applied — per-bin eigenvector projections for the extreme bands and
cached operator powers for the global polynomial term — and the result
feeds a row softmax directly. Gradients for every parameter group are
derived by hand; the ForwardTrace caches exactly the intermediates the
backward pass needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filterbank import FilterBank, boundary_penalty, boundary_penalty_grad, eval_piece
from .graph import NormalizedGraph
from .spectral import EigenSystem


@dataclass
class ModelParams:
    """Trainable state: MLP weights plus the filter bank.

    ``dims`` is (d, hidden, C); with ``linear=True`` the feature transform
    is a single d->C linear layer and w2/b2 are unused (None).
    """

    dims: tuple[int, int, int]
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None
    b2: np.ndarray | None
    filter: FilterBank
    dropout: float = 0.0
    linear: bool = False

    def validate(self) -> None:
        d, hidden, C = self.dims
        first_out = C if self.linear else hidden
        if self.w1.shape != (d, first_out) or self.b1.shape != (first_out,):
            raise ValueError("first layer shape mismatch")
        if not self.linear:
            if self.w2 is None or self.b2 is None:
                raise ValueError("two-layer model needs w2/b2")
            if self.w2.shape != (hidden, C) or self.b2.shape != (C,):
                raise ValueError("second layer shape mismatch")
        for a in (self.w1, self.b1, self.w2, self.b2):
            if a is not None and not np.all(np.isfinite(a)):
                raise ValueError("non-finite parameter")
        self.filter.validate()
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")

    def copy(self) -> "ModelParams":
        return ModelParams(
            dims=self.dims,
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=None if self.w2 is None else self.w2.copy(),
            b2=None if self.b2 is None else self.b2.copy(),
            filter=self.filter.copy(),
            dropout=self.dropout, linear=self.linear)


@dataclass
class Grads:
    """Gradient arrays mirroring the trainable fields of ModelParams."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None
    b2: np.ndarray | None
    low_coeffs: list[np.ndarray]
    high_coeffs: list[np.ndarray]
    gpr_coeffs: np.ndarray


@dataclass
class ForwardTrace:
    """Cached intermediates of one forward pass.

    Re-running ``forward`` with the same params, inputs, mode and seed
    reproduces the trace bit-exactly (the dropout mask is a deterministic
    function of the seed).
    """

    params: ModelParams
    X: np.ndarray
    ng: NormalizedGraph
    es: EigenSystem
    mode: str
    seed: int
    pre_act: np.ndarray
    hidden_kept: np.ndarray | None
    drop_mask: np.ndarray | None
    z0: np.ndarray
    powers: list[np.ndarray]
    bin_proj: list[np.ndarray]
    bin_resp: list[np.ndarray]
    logits: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray


def _all_bins(fb: FilterBank):
    """(band_eta, bin_range, coeffs, band, index) over low then high bins."""
    for i, ((s, e), coef) in enumerate(zip(fb.partition.low_bins, fb.low_coeffs)):
        yield fb.eta_low, (s, e), coef, "low", i
    for i, ((s, e), coef) in enumerate(zip(fb.partition.high_bins, fb.high_coeffs)):
        yield fb.eta_high, (s, e), coef, "high", i


def forward(params: ModelParams, X: np.ndarray, ng: NormalizedGraph,
            es: EigenSystem, mode: str = "eval", seed: int = 0) -> ForwardTrace:
    """Run the model and cache everything backward needs.

    Per-bin products are computed in the cheap order
    (k x n) @ (n x C) then (n x k) @ (k x C); the global polynomial term
    uses repeated sparse multiplies and caches every power.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != ng.n:
        raise ValueError(f"X must have {ng.n} rows")
    d, hidden, C = params.dims
    if X.shape[1] != d:
        raise ValueError(f"X must have {d} columns")
    fb = params.filter
    fb.partition.check_against(es)

    pre_act = X @ params.w1 + params.b1
    drop_mask = None
    if params.linear:
        hidden_kept = None
        z0 = pre_act
    else:
        h = np.maximum(pre_act, 0.0)
        if mode == "train" and params.dropout > 0.0:
            rng = np.random.default_rng(seed)
            drop_mask = rng.random(h.shape) >= params.dropout
            h = h * drop_mask / (1.0 - params.dropout)
        hidden_kept = h
        z0 = h @ params.w2 + params.b2

    K = fb.gpr_coeffs.size - 1
    powers = [z0]
    for _ in range(K):
        powers.append(ng.matmul(powers[-1]))
    Z = fb.eta_gpr * sum(g * P for g, P in zip(fb.gpr_coeffs, powers))

    lam = es.eigenvalues
    U = es.eigenvectors
    bin_proj, bin_resp = [], []
    for eta, (s, e), coef, _band, _i in _all_bins(fb):
        proj = U[:, s:e].T @ z0
        resp = np.asarray(eval_piece(coef, lam[s:e]))
        bin_proj.append(proj)
        bin_resp.append(resp)
        Z = Z + eta * (U[:, s:e] @ (resp[:, None] * proj))

    shifted = Z - Z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return ForwardTrace(params=params, X=X, ng=ng, es=es, mode=mode, seed=seed,
                        pre_act=pre_act, hidden_kept=hidden_kept,
                        drop_mask=drop_mask, z0=z0, powers=powers,
                        bin_proj=bin_proj, bin_resp=bin_resp, logits=Z,
                        log_probs=log_probs, probs=np.exp(log_probs))


def loss(trace: ForwardTrace, labels: np.ndarray, train_mask: np.ndarray,
         weight_decay: float = 0.0, boundary_weight: float = 0.0) -> float:
    """Mean masked cross-entropy plus L2 on the MLP weight matrices plus the
    weighted boundary penalty of the filter bank."""
    mask = np.asarray(train_mask)
    if mask.dtype == bool:
        mask = np.where(mask)[0]
    if mask.size == 0:
        raise ValueError("empty training mask")
    labels = np.asarray(labels)
    ce = -float(trace.log_probs[mask, labels[mask]].mean())
    p = trace.params
    reg = float(np.sum(p.w1 * p.w1))
    if not p.linear:
        reg += float(np.sum(p.w2 * p.w2))
    return ce + weight_decay * reg + boundary_weight * boundary_penalty(p.filter)


def backward(trace: ForwardTrace, labels: np.ndarray, train_mask: np.ndarray,
             weight_decay: float = 0.0, boundary_weight: float = 0.0) -> Grads:
    """Exact gradients of ``loss`` for every trainable parameter group.

    The filter operators are symmetric, so the upstream gradient propagates
    to the feature transform through the same per-bin projections and
    operator powers used by the forward pass.
    """
    p = trace.params
    fb = p.filter
    mask = np.asarray(train_mask)
    if mask.dtype == bool:
        mask = np.where(mask)[0]
    if mask.size == 0:
        raise ValueError("empty training mask")
    labels = np.asarray(labels)
    n, C = trace.logits.shape

    dZ = np.zeros((n, C))
    dZ[mask] = trace.probs[mask]
    dZ[mask, labels[mask]] -= 1.0
    dZ[mask] /= mask.size

    # Global polynomial term: coefficient gradients from cached powers,
    # feature gradient through the transposed (= identical) power chain.
    gpr_grad = np.empty_like(fb.gpr_coeffs)
    for k, P in enumerate(trace.powers):
        gpr_grad[k] = fb.eta_gpr * float(np.sum(dZ * P))
    dz0 = fb.eta_gpr * fb.gpr_coeffs[0] * dZ
    Qk = dZ
    for k in range(1, fb.gpr_coeffs.size):
        Qk = trace.ng.matmul(Qk)
        dz0 = dz0 + fb.eta_gpr * fb.gpr_coeffs[k] * Qk

    U = trace.es.eigenvectors
    lam = trace.es.eigenvalues
    low_grads = [np.zeros_like(c) for c in fb.low_coeffs]
    high_grads = [np.zeros_like(c) for c in fb.high_coeffs]
    for (eta, (s, e), coef, band, i), proj, resp in zip(
            _all_bins(fb), trace.bin_proj, trace.bin_resp):
        G = U[:, s:e].T @ dZ
        inner = np.sum(G * proj, axis=1)
        powers_mat = lam[s:e, None] ** np.arange(coef.size, dtype=np.float64)[None, :]
        cg = eta * (powers_mat.T @ inner)
        if band == "low":
            low_grads[i] += cg
        else:
            high_grads[i] += cg
        dz0 = dz0 + eta * (U[:, s:e] @ (resp[:, None] * G))

    if boundary_weight != 0.0:
        pen_low, pen_high = boundary_penalty_grad(fb)
        for g, pg in zip(low_grads, pen_low):
            g += boundary_weight * pg
        for g, pg in zip(high_grads, pen_high):
            g += boundary_weight * pg

    if p.linear:
        w1_grad = trace.X.T @ dz0 + 2.0 * weight_decay * p.w1
        return Grads(w1=w1_grad, b1=dz0.sum(axis=0), w2=None, b2=None,
                     low_coeffs=low_grads, high_coeffs=high_grads,
                     gpr_coeffs=gpr_grad)

    w2_grad = trace.hidden_kept.T @ dz0 + 2.0 * weight_decay * p.w2
    b2_grad = dz0.sum(axis=0)
    dh = dz0 @ p.w2.T
    if trace.drop_mask is not None:
        dh = dh * trace.drop_mask / (1.0 - p.dropout)
    dh = dh * (trace.pre_act > 0.0)
    w1_grad = trace.X.T @ dh + 2.0 * weight_decay * p.w1
    b1_grad = dh.sum(axis=0)
    return Grads(w1=w1_grad, b1=b1_grad, w2=w2_grad, b2=b2_grad,
                 low_coeffs=low_grads, high_coeffs=high_grads,
                 gpr_coeffs=gpr_grad)


def predict(trace: ForwardTrace) -> np.ndarray:
    """Per-node class prediction: row argmax, ties to the smaller index."""
    if trace.mode != "eval":
        raise ValueError("predict requires an eval-mode trace")
    return np.argmax(trace.logits, axis=1)
