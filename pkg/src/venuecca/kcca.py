"""Kernel CCA in dual form, with the same category-weighted blend as cca.

The trick: after double-centering the Gram matrices, the n columns of the
centered kernel are an n-dimensional feature representation of the n
samples, and running the linear solver on those columns is exactly dual
KCCA. The ridge r then lands on K^2 (through the representation's
covariance), which is the stabilized variant that keeps the whitening
well-posed; projections of new points are centered kernel columns against
the retained training set.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .cca import LinearCcaModel, cca_transform, fit_cca
from .linalg import NotPositiveDefiniteError


def gaussian_kernel(A, B, sigma):
    """Gram matrix K[i, j] = exp(-||a_i - b_j||^2 / (2 sigma^2)).

    A and B hold column vectors, shapes (d, n) and (d, m); result is (n, m).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = cdist(A.T, B.T, "sqeuclidean")
    return np.exp(-sq / (2.0 * sigma * sigma))


def linear_kernel(A, B):
    return np.asarray(A, dtype=float).T @ np.asarray(B, dtype=float)


def median_heuristic_bandwidth(X):
    """Median pairwise distance between columns of X, a classic sigma.

    Raises if fewer than two samples or all points coincide.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[1] < 2:
        raise ValueError("need at least 2 samples for the median heuristic")
    med = float(np.median(pdist(X.T)))
    if med <= 0.0:
        raise ValueError("all points coincide; bandwidth cannot be inferred")
    return med


def _center_columns(K_cols, mu, grand):
    # One formula for train and test alike: center each kernel column
    # against the training distribution.
    return K_cols - K_cols.mean(axis=0, keepdims=True) - mu[:, None] + grand


@dataclass
class KernelCcaModel:
    """Dual-space model. Retains the training features it kernels against."""

    Xtrain: np.ndarray
    Ytrain: np.ndarray
    kernel: str
    sigma_x: float
    sigma_y: float
    mu_x: np.ndarray
    mu_y: np.ndarray
    grand_x: float
    grand_y: float
    head: LinearCcaModel
    r: float
    beta: float

    @property
    def rho(self):
        return self.head.rho

    @property
    def k(self):
        return self.head.k

    # dual weights: column j of alpha_x weights the training samples when
    # scoring a new point's kernel vector on component j
    @property
    def alpha_x(self):
        return self.head.Wx

    @property
    def alpha_y(self):
        return self.head.Wy

    def project(self, Z, side):
        return kcca_project(self, Z, side)


def _gram(model_kernel, A, B, sigma):
    if model_kernel == "gaussian":
        return gaussian_kernel(A, B, sigma)
    if model_kernel == "linear":
        return linear_kernel(A, B)
    raise ValueError(f"unknown kernel {model_kernel!r}")


def fit_kcca(
    X,
    Y,
    k,
    r,
    sigma_x=None,
    sigma_y=None,
    groups=None,
    beta=1.0,
    kernel="gaussian",
    group_weighting="size",
):
    """Fit (category-weighted) kernel CCA.

    sigma defaults to the median heuristic per side. r > 0 is effectively
    required: the centered Gram matrix is rank-deficient (centering kills
    one direction), so the unregularized dual problem is singular.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("X and Y must pair the same samples")
    if kernel == "gaussian":
        sigma_x = float(sigma_x) if sigma_x is not None else median_heuristic_bandwidth(X)
        sigma_y = float(sigma_y) if sigma_y is not None else median_heuristic_bandwidth(Y)
    else:
        sigma_x = sigma_y = 0.0
    Kx = _gram(kernel, X, X, sigma_x)
    Ky = _gram(kernel, Y, Y, sigma_y)
    mu_x = Kx.mean(axis=1)
    mu_y = Ky.mean(axis=1)
    grand_x = float(Kx.mean())
    grand_y = float(Ky.mean())
    Rx = _center_columns(Kx, mu_x, grand_x)
    Ry = _center_columns(Ky, mu_y, grand_y)
    try:
        head = fit_cca(Rx, Ry, k, r, groups=groups, beta=beta, group_weighting=group_weighting)
    except NotPositiveDefiniteError as e:
        raise NotPositiveDefiniteError(
            f"dual kernel system is ill-conditioned ({e}); "
            "increase r or widen sigma",
            eigenvalue=e.eigenvalue,
        ) from e
    return KernelCcaModel(
        Xtrain=X.copy(),
        Ytrain=Y.copy(),
        kernel=kernel,
        sigma_x=sigma_x,
        sigma_y=sigma_y,
        mu_x=mu_x,
        mu_y=mu_y,
        grand_x=grand_x,
        grand_y=grand_y,
        head=head,
        r=float(r),
        beta=float(beta if groups is not None else 1.0),
    )


def kcca_project(model, Z, side):
    """Canonical scores for new points on one side.

    Z is (d, m); returns (k, m). Projecting the training batch reproduces
    training-time scores exactly because the same centering runs here.
    """
    if side not in ("image", "text"):
        raise ValueError(f"side must be 'image' or 'text', got {side!r}")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    train, sigma, mu, grand = (
        (model.Xtrain, model.sigma_x, model.mu_x, model.grand_x)
        if side == "image"
        else (model.Ytrain, model.sigma_y, model.mu_y, model.grand_y)
    )
    if Z.shape[0] != train.shape[0]:
        raise ValueError(
            f"{side} side expects {train.shape[0]}-dim vectors, got {Z.shape[0]}"
        )
    K = _gram(model.kernel, train, Z, sigma)
    return cca_transform(model.head, _center_columns(K, mu, grand), side)
