"""Elastic-net temporal response functions via ADMM.

Objective (no 1/T or 1/2 scaling)::

    ||y - X w||^2 + alpha * ((1 - l1_ratio) * ||w||^2 + l1_ratio * ||w||_1)

ADMM splits ``w = z``. The smooth part gives the w-update

    (2 X'X + (2 alpha (1 - l1_ratio) + rho) I) w = 2 X'y + rho (z - u)

and the L1 part a soft threshold at ``alpha * l1_ratio / rho``. The
w-system is diagonalized once per design (:class:`GramFactor`), so every
(alpha, l1_ratio) grid point and every response channel reuses the same
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import LaggedDesign


@dataclass(frozen=True)
class ElasticNetConfig:
    alpha: float = 1e-2
    l1_ratio: float = 0.1
    rho: float = 0.1
    max_iter: int = 10_000
    tol: float = 1e-9

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if self.rho <= 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("rho, tol and max_iter must be positive")


@dataclass
class TRFWeights:
    w: np.ndarray
    converged: bool
    iterations: int
    objective: float


def soft_threshold(v, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def elastic_net_objective(X, y, w, alpha: float, l1_ratio: float) -> np.ndarray | float:
    resid = y - X @ w
    return (np.sum(resid**2, axis=0)
            + alpha * ((1 - l1_ratio) * np.sum(w**2, axis=0) + l1_ratio * np.sum(np.abs(w), axis=0)))


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, LaggedDesign):
        X = X.matrix
    return np.asarray(X, dtype=np.float64)


class GramFactor:
    """Spectral decomposition solving ``(2 X'X + c I) b`` for any ``c > 0``.

    Decomposes ``X'X`` when ``X`` is tall and ``X X'`` (matrix-inversion
    identity) when it is wide.
    """

    def __init__(self, X):
        X = _as_matrix(X)
        if not np.all(np.isfinite(X)):
            raise ValueError("design matrix contains NaN or Inf")
        self.X = X
        T, p = X.shape
        self.primal = p <= T
        gram = X.T @ X if self.primal else X @ X.T
        evals, evecs = scipy.linalg.eigh(gram)
        self.evals = np.clip(evals, 0.0, None)
        self.evecs = evecs
        self._inverses: dict[float, np.ndarray] = {}

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def inverse(self, c: float) -> np.ndarray:
        """Explicit ``(2 X'X + c I)^-1`` (primal form only), cached per ``c``."""
        if not self.primal:
            raise ValueError("explicit inverse is only formed for tall designs")
        M = self._inverses.get(c)
        if M is None:
            V = self.evecs
            M = (V / (2.0 * self.evals + c)) @ V.T
            self._inverses[c] = M
        return M

    def solve(self, b: np.ndarray, c: float) -> np.ndarray:
        V = self.evecs
        if self.primal:
            return V @ ((V.T @ b) / (2.0 * self.evals + c)[:, None])
        X = self.X
        inner = V @ ((V.T @ (X @ b)) / (0.5 * c + self.evals)[:, None])
        return (b - X.T @ inner) / c


@dataclass
class AdmmState:
    z: np.ndarray
    u: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray


def admm_solve(factor: GramFactor, Xty: np.ndarray, cfg: ElasticNetConfig,
               z0: np.ndarray | None = None, u0: np.ndarray | None = None) -> AdmmState:
    """Run ADMM for every column of ``Xty`` (one response channel each).

    Columns stop updating individually once both residuals are below
    ``cfg.tol``.
    """
    Xty = np.asarray(Xty, dtype=np.float64)
    if Xty.ndim == 1:
        Xty = Xty[:, None]
    p, k = Xty.shape
    c = 2.0 * cfg.alpha * (1.0 - cfg.l1_ratio) + cfg.rho
    thr = cfg.alpha * cfg.l1_ratio / cfg.rho
    z = np.zeros((p, k)) if z0 is None else np.array(z0, dtype=np.float64).reshape(p, k)
    u = np.zeros((p, k)) if u0 is None else np.array(u0, dtype=np.float64).reshape(p, k)
    rhs = 2.0 * Xty
    converged = np.zeros(k, dtype=bool)
    iterations = np.zeros(k, dtype=np.int64)
    active = np.arange(k)
    if factor.primal:
        # w = M rhs + rho M (z - u): one product per iteration
        M = factor.inverse(c)
        base = M @ rhs
        step = lambda cols, d: base[:, cols] + cfg.rho * (M @ d)  # noqa: E731
    else:
        step = lambda cols, d: factor.solve(rhs[:, cols] + cfg.rho * d, c)  # noqa: E731
    for it in range(1, cfg.max_iter + 1):
        za, ua = z[:, active], u[:, active]
        w = step(active, za - ua)
        z_new = soft_threshold(w + ua, thr)
        u[:, active] = ua + w - z_new
        primal = np.linalg.norm(w - z_new, axis=0)
        dual = cfg.rho * np.linalg.norm(z_new - za, axis=0)
        z[:, active] = z_new
        iterations[active] = it
        done = np.maximum(primal, dual) < cfg.tol
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    return AdmmState(z, u, converged, iterations)


def elastic_net_admm(X, y, cfg: ElasticNetConfig = ElasticNetConfig(), *,
                     factor: GramFactor | None = None,
                     warm_start: AdmmState | None = None):
    """Fit elastic-net weights for one response (1-D ``y``) or several (2-D).

    Returns a :class:`TRFWeights` for 1-D ``y`` and a list of them otherwise.
    The returned weights are the sparse ``z`` iterate; if ``max_iter`` is
    reached the last iterate is returned with ``converged=False``.
    """
    Xm = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains NaN or Inf")
    single = y.ndim == 1
    Y = y[:, None] if single else y
    if Y.shape[0] != Xm.shape[0]:
        raise ValueError(f"design has {Xm.shape[0]} rows, response {Y.shape[0]}")
    if factor is None:
        factor = GramFactor(Xm)
    z0 = u0 = None
    if warm_start is not None:
        z0, u0 = warm_start.z, warm_start.u
    state = admm_solve(factor, Xm.T @ Y, cfg, z0, u0)
    obj = elastic_net_objective(Xm, Y, state.z, cfg.alpha, cfg.l1_ratio)
    fits = [TRFWeights(state.z[:, i].copy(), bool(state.converged[i]),
                       int(state.iterations[i]), float(obj[i]))
            for i in range(Y.shape[1])]
    return fits[0] if single else fits


def ridge_closed_form(X, y, alpha_ridge: float) -> np.ndarray:
    """Exact minimizer of ``||y - X w||^2 + alpha_ridge ||w||^2``."""
    X = _as_matrix(X)
    A = X.T @ X + alpha_ridge * np.eye(X.shape[1])
    try:
        return scipy.linalg.solve(A, X.T @ np.asarray(y, dtype=np.float64), assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ValueError("ridge system is singular") from exc
