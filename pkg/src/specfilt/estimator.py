"""Scikit-learn style facade over the spectral-filter classifier.

The model is transductive: it trains and predicts on one fixed graph, with
labels supplied for a subset of nodes (mark unknown nodes with -1, as in
sklearn's semi-supervised API). Hyperparameters live in the constructor so
``get_params``/``set_params``, cloning and grid search compose as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .graph import Dataset, build_graph, sym_normalize
from .model import forward, predict
from .spectral import dense_eigh, extreme_bands, lanczos_extreme
from .train import TrainConfig, train_loop
from .validation import check_edge_list, check_feature_matrix, check_index_set, check_labels


class PiecewiseSpectralClassifier(BaseEstimator, ClassifierMixin):
    """Node classifier combining banded spectral filters with a global
    polynomial propagation term.

    Parameters
    ----------
    hidden : int
        Width of the MLP hidden layer (ignored when ``linear=True``).
    linear : bool
        Use a single linear feature transform instead of the two-layer MLP.
    k_low, k_high : int
        Number of smallest/largest eigenpairs given adaptive filter pieces.
    bins_low, bins_high : int
        Contiguous bins per band; each bin learns its own polynomial piece.
    order : int
        Degree of each per-bin piece.
    gpr_order : int
        Degree of the globally supported polynomial term.
    eta_low, eta_high, eta_gpr : float
        Mixing weights of the three filter parts.
    init_scheme : {"ppr", "nppr", "random"}
        Initialization of the global polynomial coefficients.
    alpha : float
        Restart weight for ppr/nppr initialization.
    lr, lr_decay, lr_decay_every, weight_decay, dropout, boundary_weight,
    max_epochs, patience, seed
        Optimization settings; see TrainConfig.
    val_fraction : float
        Fraction of labeled nodes held out for early stopping when no
        explicit validation mask is passed to ``fit``.
    dense_cutoff : int
        Graphs up to this many nodes use the dense eigensolver; larger
        graphs use the Lanczos path.
    """

    def __init__(self, hidden=64, linear=False, k_low=16, k_high=16,
                 bins_low=2, bins_high=2, order=2, gpr_order=10,
                 eta_low=0.5, eta_high=0.5, eta_gpr=0.5, init_scheme="ppr",
                 alpha=0.1, lr=0.01, lr_decay=0.99, lr_decay_every=50,
                 weight_decay=5e-4, dropout=0.5, boundary_weight=0.0,
                 max_epochs=1000, patience=200, seed=0,
                 val_fraction=0.25, dense_cutoff=512):
        self.hidden = hidden
        self.linear = linear
        self.k_low = k_low
        self.k_high = k_high
        self.bins_low = bins_low
        self.bins_high = bins_high
        self.order = order
        self.gpr_order = gpr_order
        self.eta_low = eta_low
        self.eta_high = eta_high
        self.eta_gpr = eta_gpr
        self.init_scheme = init_scheme
        self.alpha = alpha
        self.lr = lr
        self.lr_decay = lr_decay
        self.lr_decay_every = lr_decay_every
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.boundary_weight = boundary_weight
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.val_fraction = val_fraction
        self.dense_cutoff = dense_cutoff

    def _config(self) -> TrainConfig:
        return TrainConfig(
            hidden=self.hidden, linear=self.linear, k_low=self.k_low,
            k_high=self.k_high, bins_low=self.bins_low, bins_high=self.bins_high,
            order=self.order, gpr_order=self.gpr_order, eta_low=self.eta_low,
            eta_high=self.eta_high, eta_gpr=self.eta_gpr,
            init_scheme=self.init_scheme, alpha=self.alpha, lr=self.lr,
            lr_decay=self.lr_decay, lr_decay_every=self.lr_decay_every,
            weight_decay=self.weight_decay, dropout=self.dropout,
            boundary_weight=self.boundary_weight, max_epochs=self.max_epochs,
            patience=self.patience, seed=self.seed)

    def fit(self, X, y, *, edges, val_idx=None, test_idx=None):
        """Train on one graph.

        Parameters
        ----------
        X : (n, d) array
            Node features.
        y : (n,) integer array
            Class labels; -1 marks nodes without a label.
        edges : (m, 2) integer array
            Undirected edge list (symmetrized internally).
        val_idx : 1D index array, optional
            Labeled nodes to hold out for early stopping. Defaults to a
            seeded ``val_fraction`` slice of the labeled nodes.
        test_idx : 1D index array, optional
            Labeled nodes excluded from training and validation; their
            accuracy at the best-validation checkpoint is reported in
            ``result_``.
        """
        X = check_feature_matrix(X)
        n = X.shape[0]
        y = check_labels(y, n)
        edges = check_edge_list(edges, n)
        labeled = np.where(y >= 0)[0]
        if labeled.size < 2:
            raise ValueError("need at least 2 labeled nodes")

        if val_idx is None:
            rng = np.random.default_rng(self.seed)
            perm = rng.permutation(labeled)
            n_val = max(1, int(round(self.val_fraction * labeled.size)))
            if n_val >= labeled.size:
                raise ValueError("val_fraction leaves no training nodes")
            val_idx = perm[:n_val]
        val_idx = check_index_set(val_idx, n, "val_idx")
        if np.any(y[val_idx] < 0):
            raise ValueError("val_idx must point at labeled nodes")
        if test_idx is None:
            test_idx = val_idx  # nothing held out: report validation nodes
        test_idx = check_index_set(test_idx, n, "test_idx")
        reserved = set(val_idx.tolist()) | set(test_idx.tolist())
        train_idx = np.asarray([i for i in labeled if i not in reserved],
                               dtype=np.int64)
        if train_idx.size == 0:
            raise ValueError("no labeled nodes left for training")

        # Remap labels to compact 0..C-1 and keep the class book-keeping
        # sklearn expects.
        self.classes_ = np.unique(y[labeled])
        remap = {c: i for i, c in enumerate(self.classes_.tolist())}
        y_compact = np.zeros(n, dtype=np.int64)
        y_compact[labeled] = [remap[c] for c in y[labeled].tolist()]
        if self.classes_.size < 2:
            raise ValueError("need at least 2 distinct classes")

        graph = build_graph(n, edges)
        ds = Dataset(graph=graph, features=X, labels=y_compact,
                     splits={"train": train_idx, "val": val_idx, "test": test_idx})
        ng = sym_normalize(graph)
        if n <= self.dense_cutoff or self.k_low + self.k_high >= n:
            es = dense_eigh(ng.to_dense())
        else:
            es = lanczos_extreme(ng, self.k_low, self.k_high, tol=1e-10,
                                 seed=self.seed)
        config = self._config()
        self.result_ = train_loop(ds, ng, es, config)
        self.params_ = self.result_.checkpoint
        self._ng = ng
        self._es = es
        self._X = X
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict")

    def predict_proba(self, X=None) -> np.ndarray:
        """Class probabilities for every node of the training graph.

        Passing ``X`` evaluates the trained filter on alternative features
        for the same graph; it must match the training shape.
        """
        self._check_fitted()
        X = self._X if X is None else check_feature_matrix(X)
        if X.shape != self._X.shape:
            raise ValueError(f"X must have shape {self._X.shape} (transductive model)")
        es_r = extreme_bands(self._es, self.k_low, self.k_high)
        trace = forward(self.params_, X, self._ng, es_r, mode="eval")
        return trace.probs

    def predict(self, X=None) -> np.ndarray:
        self._check_fitted()
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def score(self, X=None, y=None) -> float:
        """Accuracy over the labeled entries of ``y`` (>= 0)."""
        self._check_fitted()
        if y is None:
            raise ValueError("score requires labels")
        pred = self.predict(X)
        y = check_labels(np.asarray(y), pred.size)
        mask = y >= 0
        if not mask.any():
            raise ValueError("y has no labeled entries")
        return float(np.mean(pred[mask] == y[mask]))
