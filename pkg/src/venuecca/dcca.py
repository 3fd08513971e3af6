"""Deep CCA with the category-weighted objective (C-DCCA), trained by
backpropagating the correlation objective through two sub-networks.

The objective for a batch of network outputs Hx, Hy is the sum of the top
k singular values of T = C_xx^{-1/2} C_xy C_yy^{-1/2}, where C_xy is the
beta-blend from the cca module. Its gradient with respect to the raw
outputs is computed analytically; the blend contributes per-sample group
terms on top of the classic deep-CCA gradient, and beta=1 reduces to that
classic form exactly.

Training alternates: forward both nets on a category-stratified batch,
solve the small CCA in closed form, push the objective's gradient back
through both nets, and let Adam take a step. After the loop a linear head
is fitted on eval-mode outputs of the full training set; projections go
through net then head.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cca import (
    GroupIndex,
    LinearCcaModel,
    NoCrossPairsError,
    cca_transform,
    fit_cca,
    group_sums,
    pair_coefficients,
)
from .linalg import inv_sqrt_sym, regularized_covariance
from .neural import AdamState, MlpNetwork, Standardizer, adam_step, mlp_backward, mlp_forward

GAP_TOL = 1e-9


def cca_objective(Hx, Hy, groups=None, beta=1.0, r=1e-4, k=None, group_weighting="size"):
    """Correlation objective and its exact gradients for a batch.

    Parameters
    ----------
    Hx, Hy : (k'_x, n), (k'_y, n) network outputs, columns aligned.
    groups : GroupIndex over the n samples, or None for the plain
        objective.
    beta : same-venue weight of the blended cross-covariance.
    r : ridge on both auto-covariances.
    k : how many leading singular values to sum; defaults to the full
        min(k'_x, k'_y).

    Returns
    -------
    (value, grad_Hx, grad_Hy) where the gradients are with respect to the
    raw uncentered outputs and are exact (finite differences agree to
    first order). When the k-th and (k+1)-th singular values coincide the
    objective is not differentiable; a subgradient is returned with a
    warning.
    """
    Hx = np.asarray(Hx, dtype=float)
    Hy = np.asarray(Hy, dtype=float)
    if Hx.ndim != 2 or Hy.ndim != 2 or Hx.shape[1] != Hy.shape[1]:
        raise ValueError("Hx and Hy must be 2-d with matching sample counts")
    dx, n = Hx.shape
    dy = Hy.shape[0]
    full = min(dx, dy)
    if k is None:
        k = full
    if not 1 <= k <= full:
        raise ValueError(f"k must lie in 1..{full}, got {k}")
    if n <= max(dx, dy):
        raise ValueError(
            f"need more samples than output dims: n={n}, dims=({dx}, {dy})"
        )
    Hxc = Hx - Hx.mean(axis=1, keepdims=True)
    Hyc = Hy - Hy.mean(axis=1, keepdims=True)
    Cxx = regularized_covariance(Hxc, r)
    Cyy = regularized_covariance(Hyc, r)
    rescale = n / (n - 1.0)
    if groups is None:
        Cxy = (Hxc @ Hyc.T) / (n - 1.0)
    else:
        a, b = pair_coefficients(groups, beta, group_weighting)
        same = (Hxc * a) @ Hyc.T
        if beta < 1.0:
            diff_x = group_sums(Hxc, groups) - Hxc
            diff_y = group_sums(Hyc, groups) - Hyc
            cross = (Hxc * b) @ diff_y.T
        else:
            cross = 0.0
        Cxy = rescale * (beta * same + (1.0 - beta) * cross)
    A = inv_sqrt_sym(Cxx)
    B = inv_sqrt_sym(Cyy)
    T = A @ Cxy @ B
    U, s, Vt = np.linalg.svd(T)
    if k < full and s[k - 1] - s[k] < GAP_TOL:
        warnings.warn(
            f"singular values {k} and {k + 1} coincide within {GAP_TOL}; "
            "the objective is not differentiable here, returning a subgradient"
        )
    value = float(s[:k].sum())
    Uk = U[:, :k]
    Vk = Vt[:k].T
    sk = s[:k]
    nabla_xy = A @ Uk @ Vk.T @ B
    nabla_xx = -0.5 * (A @ (Uk * sk) @ Uk.T @ A)
    nabla_yy = -0.5 * (B @ (Vk * sk) @ Vk.T @ B)
    gx = (2.0 / (n - 1.0)) * (nabla_xx @ Hxc)
    gy = (2.0 / (n - 1.0)) * (nabla_yy @ Hyc)
    if groups is None:
        gx += (nabla_xy @ Hyc) / (n - 1.0)
        gy += (nabla_xy.T @ Hxc) / (n - 1.0)
    else:
        gx += rescale * beta * (nabla_xy @ (Hyc * a))
        gy += rescale * beta * (nabla_xy.T @ (Hxc * a))
        if beta < 1.0:
            gx += rescale * (1.0 - beta) * (nabla_xy @ (diff_y * b))
            gy += rescale * (1.0 - beta) * (nabla_xy.T @ (diff_x * b))
    # chain through the centering map: right-multiply by I - 11^T/n
    gx -= gx.mean(axis=1, keepdims=True)
    gy -= gy.mean(axis=1, keepdims=True)
    return value, gx, gy


@dataclass
class DeepCcaModel:
    """Two trained sub-networks plus the linear head fitted after training."""

    net_x: MlpNetwork
    net_y: MlpNetwork
    head: LinearCcaModel
    config: object
    history_objective: np.ndarray
    history_epoch: np.ndarray

    @property
    def rho(self):
        return self.head.rho

    @property
    def k(self):
        return self.head.k

    def project(self, Z, side):
        return dcca_project(self, Z, side)


def stratified_batches(categories, batch_size, rng):
    """Deal samples into ceil(n / batch_size) category-balanced batches.

    Members of each category are shuffled, then dealt round-robin across
    the batches, so every batch holds its proportional share of each
    category (within one sample). Batch order and contents are
    deterministic given the rng state.
    """
    categories = np.asarray(categories)
    n = len(categories)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n_batches = math.ceil(n / batch_size)
    buckets = [[] for _ in range(n_batches)]
    j = 0
    for c in np.unique(categories):
        members = np.flatnonzero(categories == c)
        rng.shuffle(members)
        for i in members:
            buckets[j % n_batches].append(int(i))
            j += 1
    return [np.array(b, dtype=int) for b in buckets]


def train_dcca(train, config):
    """Run the alternating training loop and fit the final head.

    train is a PairedDataset; config a neural.TrainConfig. Training stops
    after config.epochs or once the epoch-mean objective improves by less
    than config.tol for config.patience consecutive epochs. Fixed seed
    means bit-identical history.
    """
    n = train.n
    if n == 0:
        raise ValueError("training set is empty")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds n={n}")
    groups_full = GroupIndex.from_labels(train.categories)
    rng = np.random.default_rng(config.seed)
    std_x = Standardizer.fit(train.X)
    std_y = Standardizer.fit(train.Y)
    sizes_x = (train.X.shape[0], *config.hidden_sizes, config.k)
    sizes_y = (train.Y.shape[0], *config.hidden_sizes, config.k)
    net_x = MlpNetwork.init(sizes_x, std_x, rng, dropout_rate=config.dropout_rate)
    net_y = MlpNetwork.init(sizes_y, std_y, rng, dropout_rate=config.dropout_rate)
    adam_x = AdamState(net_x.parameters())
    adam_y = AdamState(net_y.parameters())
    history, history_epoch = [], []
    prev_mean = None
    stall = 0
    for epoch in range(config.epochs):
        batch_values = []
        for idx in stratified_batches(train.categories, config.batch_size, rng):
            if len(idx) <= config.k:
                raise ValueError(
                    f"a batch of {len(idx)} samples cannot support k={config.k} "
                    "components; increase batch_size or shrink k"
                )
            seed_x = int(rng.integers(2**63))
            seed_y = int(rng.integers(2**63))
            cache_x = mlp_forward(net_x, train.X[:, idx], mode="train", seed=seed_x)
            cache_y = mlp_forward(net_y, train.Y[:, idx], mode="train", seed=seed_y)
            bgroups = GroupIndex.from_labels(train.categories[idx])
            try:
                value, gx, gy = cca_objective(
                    cache_x.output,
                    cache_y.output,
                    groups=bgroups,
                    beta=config.beta,
                    r=config.r,
                    k=config.k,
                    group_weighting=config.group_weighting,
                )
            except NoCrossPairsError:
                warnings.warn(
                    "batch holds one sample per category; falling back to the "
                    "pairwise covariance for this batch"
                )
                value, gx, gy = cca_objective(
                    cache_x.output,
                    cache_y.output,
                    groups=bgroups,
                    beta=1.0,
                    r=config.r,
                    k=config.k,
                    group_weighting=config.group_weighting,
                )
            # Adam minimizes; the objective is maximized
            grads_x, _ = mlp_backward(net_x, cache_x, -gx)
            grads_y, _ = mlp_backward(net_y, cache_y, -gy)
            adam_step(net_x.parameters(), grads_x, adam_x, config)
            adam_step(net_y.parameters(), grads_y, adam_y, config)
            history.append(value)
            history_epoch.append(epoch)
            batch_values.append(value)
        epoch_mean = float(np.mean(batch_values))
        if prev_mean is not None:
            stall = stall + 1 if epoch_mean - prev_mean < config.tol else 0
            if stall >= config.patience:
                break
        prev_mean = epoch_mean
    Hx = mlp_forward(net_x, train.X, mode="eval").output
    Hy = mlp_forward(net_y, train.Y, mode="eval").output
    try:
        head = fit_cca(
            Hx,
            Hy,
            config.k,
            config.r,
            groups=groups_full,
            beta=config.beta,
            group_weighting=config.group_weighting,
        )
    except NoCrossPairsError:
        warnings.warn(
            "training set holds one sample per category; head falls back to "
            "the pairwise covariance"
        )
        head = fit_cca(Hx, Hy, config.k, config.r, groups=groups_full, beta=1.0)
    return DeepCcaModel(
        net_x=net_x,
        net_y=net_y,
        head=head,
        config=config,
        history_objective=np.array(history),
        history_epoch=np.array(history_epoch, dtype=int),
    )


def dcca_project(model, Z, side):
    """Eval-mode forward through one sub-network, then the linear head."""
    if side not in ("image", "text"):
        raise ValueError(f"side must be 'image' or 'text', got {side!r}")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    net = model.net_x if side == "image" else model.net_y
    H = mlp_forward(net, Z, mode="eval").output
    return cca_transform(model.head, H, side)
