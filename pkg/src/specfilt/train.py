"""Training loop: Adam, stepped learning-rate decay, early stopping on
validation accuracy, and a seeded random hyperparameter search over the
standard sweep ranges."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .filterbank import FilterBank, gpr_init, make_partitions
from .graph import Dataset, NormalizedGraph
from .model import Grads, ModelParams, backward, forward, loss, predict
from .spectral import EigenSystem, extreme_bands


class TrainingDiverged(RuntimeError):
    """Raised when the loss or a gradient becomes non-finite; carries the
    per-epoch history collected so far."""

    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    hidden: int = 64
    linear: bool = False
    k_low: int = 16
    k_high: int = 16
    bins_low: int = 2
    bins_high: int = 2
    order: int = 2
    gpr_order: int = 10
    eta_low: float = 0.5
    eta_high: float = 0.5
    eta_gpr: float = 0.5
    init_scheme: str = "ppr"
    alpha: float = 0.1
    lr: float = 0.01
    lr_decay: float = 0.99
    lr_decay_every: int = 50
    weight_decay: float = 5e-4
    dropout: float = 0.5
    boundary_weight: float = 0.0
    max_epochs: int = 1000
    patience: int = 200
    seed: int = 0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValueError("lr_decay must be in (0, 1]")
        if not (1 <= self.patience <= self.max_epochs):
            raise ValueError("need 1 <= patience <= max_epochs")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter leaf."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    best_val_acc: float
    test_acc_at_best_val: float
    best_epoch: int
    loss_history: list[float]
    checkpoint: ModelParams
    epoch_log: list[dict] = field(default_factory=list)


def param_leaves(params: ModelParams) -> list[np.ndarray]:
    """Trainable arrays in a fixed order (shared by grads and Adam state)."""
    leaves = [params.w1, params.b1]
    if not params.linear:
        leaves += [params.w2, params.b2]
    leaves += list(params.filter.low_coeffs)
    leaves += list(params.filter.high_coeffs)
    leaves.append(params.filter.gpr_coeffs)
    return leaves


def grad_leaves(grads: Grads, linear: bool) -> list[np.ndarray]:
    leaves = [grads.w1, grads.b1]
    if not linear:
        leaves += [grads.w2, grads.b2]
    leaves += list(grads.low_coeffs)
    leaves += list(grads.high_coeffs)
    leaves.append(grads.gpr_coeffs)
    return leaves


def init_adam(params: ModelParams) -> AdamState:
    leaves = param_leaves(params)
    return AdamState(m=[np.zeros_like(a) for a in leaves],
                     v=[np.zeros_like(a) for a in leaves])


def adam_step(params: ModelParams, grads: Grads, state: AdamState,
              lr: float) -> tuple[ModelParams, AdamState]:
    """Standard bias-corrected Adam update, applied in place."""
    p_leaves = param_leaves(params)
    g_leaves = grad_leaves(grads, params.linear)
    for g in g_leaves:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(p_leaves, g_leaves, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Stepped decay: lr * decay^(epoch div period)."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    return config.lr * config.lr_decay ** (epoch // config.lr_decay_every)


def _accuracy(pred: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    if idx.size == 0:
        return 0.0
    return float(np.mean(pred[idx] == labels[idx]))


def init_params(config: TrainConfig, d: int, C: int, es: EigenSystem) -> ModelParams:
    """Fresh model: seeded uniform fan-in MLP init, zeroed adaptive pieces,
    scheme-initialized global coefficients.

    With the adaptive pieces at zero the fresh model is exactly the pure
    global-polynomial propagation model.
    """
    ss = np.random.SeedSequence(config.seed)
    rng_mlp, rng_gpr = (np.random.default_rng(s) for s in ss.spawn(2))
    part = make_partitions(es, config.bins_low, config.bins_high)
    fb = FilterBank(
        partition=part,
        low_coeffs=[np.zeros(config.order + 1) for _ in range(config.bins_low)],
        high_coeffs=[np.zeros(config.order + 1) for _ in range(config.bins_high)],
        gpr_coeffs=gpr_init(config.init_scheme, config.alpha, config.gpr_order,
                            seed=int(rng_gpr.integers(2 ** 31))),
        eta_low=config.eta_low, eta_high=config.eta_high, eta_gpr=config.eta_gpr)

    def uniform_fan_in(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng_mlp.uniform(-bound, bound, shape)

    if config.linear:
        params = ModelParams(dims=(d, 0, C),
                             w1=uniform_fan_in(d, (d, C)),
                             b1=uniform_fan_in(d, C),
                             w2=None, b2=None, filter=fb,
                             dropout=config.dropout, linear=True)
    else:
        params = ModelParams(dims=(d, config.hidden, C),
                             w1=uniform_fan_in(d, (d, config.hidden)),
                             b1=uniform_fan_in(d, config.hidden),
                             w2=uniform_fan_in(config.hidden, (config.hidden, C)),
                             b2=uniform_fan_in(config.hidden, C),
                             filter=fb, dropout=config.dropout)
    params.validate()
    return params


def train_loop(dataset: Dataset, ng: NormalizedGraph, es: EigenSystem,
               config: TrainConfig) -> TrainResult:
    """Full-graph training with early stopping.

    Keeps the checkpoint with the best validation accuracy (ties broken by
    lower validation loss) and reports the test accuracy of that
    checkpoint. Deterministic for a fixed config and inputs.
    """
    config.validate()
    for name in ("train", "val", "test"):
        if dataset.splits[name].size == 0:
            raise ValueError(f"empty split '{name}'")
    es_r = extreme_bands(es, config.k_low, config.k_high)
    d, C = dataset.features.shape[1], dataset.num_classes
    params = init_params(config, d, C, es_r)
    state = init_adam(params)
    drop_seeds = np.random.SeedSequence(config.seed).spawn(3)[2].generate_state(
        config.max_epochs)

    labels = dataset.labels
    tr_idx, val_idx, te_idx = (dataset.splits[k] for k in ("train", "val", "test"))
    X = dataset.features

    best_val_acc = -1.0
    best_val_loss = np.inf
    best_epoch = -1
    best_params = params.copy()
    since_improve = 0
    loss_history: list[float] = []
    epoch_log: list[dict] = []

    for epoch in range(config.max_epochs):
        lr = lr_at(config, epoch)
        trace = forward(params, X, ng, es_r, mode="train",
                        seed=int(drop_seeds[epoch]))
        l = loss(trace, labels, tr_idx, config.weight_decay, config.boundary_weight)
        if not np.isfinite(l):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch_log)
        loss_history.append(l)
        grads = backward(trace, labels, tr_idx, config.weight_decay,
                         config.boundary_weight)
        try:
            adam_step(params, grads, state, lr)
        except ValueError as exc:
            raise TrainingDiverged(f"{exc} at epoch {epoch}", epoch_log) from exc

        ev = forward(params, X, ng, es_r, mode="eval")
        pred = predict(ev)
        train_acc = _accuracy(pred, labels, tr_idx)
        val_acc = _accuracy(pred, labels, val_idx)
        val_loss = loss(ev, labels, val_idx, 0.0, 0.0)
        epoch_log.append({"epoch": epoch, "loss": l, "train_acc": train_acc,
                          "val_acc": val_acc, "lr": lr})

        if val_acc > best_val_acc or (val_acc == best_val_acc
                                      and val_loss < best_val_loss):
            best_val_acc = val_acc
            best_val_loss = val_loss
            best_epoch = epoch
            best_params = params.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.patience:
                break

    final = forward(best_params, X, ng, es_r, mode="eval")
    test_acc = _accuracy(predict(final), labels, te_idx)
    return TrainResult(best_val_acc=best_val_acc, test_acc_at_best_val=test_acc,
                       best_epoch=best_epoch, loss_history=loss_history,
                       checkpoint=best_params, epoch_log=epoch_log)


DEFAULT_SEARCH_RANGES: dict = {
    "bins": [2, 3, 4, 5, 10, 20],
    "order": list(range(1, 11)),
    "k_extreme": [32, 64, 128, 256, 512, 1024],
}


def random_search(dataset: Dataset, ng: NormalizedGraph, es: EigenSystem,
                  ranges: dict | None = None, trials: int = 10, seed: int = 0,
                  base_config: TrainConfig | None = None
                  ) -> tuple[TrainResult, list[dict]]:
    """Seeded uniform sampling over the sweep ranges; best trial by
    validation accuracy.

    Infeasible draws (more eigenpairs than nodes, more bins than band
    entries) are resampled and logged. The band mixing weight is drawn in
    (0, 1) with the low and high weights tied and the global weight set to
    their complement.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    ranges = {**DEFAULT_SEARCH_RANGES, **(ranges or {})}
    base = base_config or TrainConfig()
    n = dataset.n
    best: TrainResult | None = None
    best_trial = -1
    log: list[dict] = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        resampled = 0
        while True:
            k = int(rng.choice(ranges["k_extreme"]))
            bins = int(rng.choice(ranges["bins"]))
            order = int(rng.choice(ranges["order"]))
            eta = float(rng.uniform(0.0, 1.0))
            feasible = (2 * k <= n and bins <= k
                        and k <= es.available_low and k <= es.available_high)
            if feasible:
                break
            resampled += 1
            if resampled > 200:
                raise ValueError("no feasible configuration in the given ranges")
        config = replace(base, k_low=k, k_high=k, bins_low=bins, bins_high=bins,
                         order=order, eta_low=eta, eta_high=eta, eta_gpr=1.0 - eta,
                         seed=int(np.random.SeedSequence([seed, trial, 1]).generate_state(1)[0]))
        result = train_loop(dataset, ng, es, config)
        log.append({"trial": trial, "k_extreme": k, "bins": bins, "order": order,
                    "eta": eta, "resampled": resampled,
                    "best_val_acc": result.best_val_acc,
                    "test_acc": result.test_acc_at_best_val,
                    "best_epoch": result.best_epoch})
        if best is None or result.best_val_acc > best.best_val_acc:
            best = result
            best_trial = trial
    log.append({"selected_trial": best_trial})
    return best, log
