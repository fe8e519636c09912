"""Spatial-temporal smoothing of the channel stack on a weighted graph.

Every (channel, time) sample becomes a node with a 3-vector feature
(normalized time, normalized channel index, z-scored value). Edge weights
are a Mahalanobis-style kernel exp(-df' M df) under a learned symmetric PSD
3x3 metric M. Denoising minimizes

    ||y - x||^2 + mu * x' L x,       L = D - A,

whose minimizer solves (I + mu L) x = y; we use a Jacobi-preconditioned
conjugate gradient. The metric is refined by projected gradient descent
with an adaptive step size, accepting a step only when the full objective
decreases, so the objective trace is non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import NumericalError, ParameterError
from .preprocess import CleanChannels
from .validation import as_channel_matrix

DEFAULT_MU = 0.3
DEFAULT_WINDOW = 15
DEFAULT_ALPHA0 = 1e-2
DEFAULT_STEP_UP = 1.1
DEFAULT_MAX_ITERS = 50
DEFAULT_TOL = 1e-4

_MIN_STEP = 1e-15  # halving below this means the metric step has stalled


@dataclass
class BreathGraph:
    """Nodes, edges (each undirected pair stored once, i < j), and the metric."""

    n_nodes: int
    features: np.ndarray  # (n, 3)
    edges: np.ndarray  # (E, 2) int, edges[:, 0] < edges[:, 1]
    weights: np.ndarray  # (E,) nonnegative
    metric: np.ndarray  # (3, 3) symmetric PSD
    mu: float
    shape: tuple  # (n_channels, T) the node grid

    def laplacian(self) -> sp.csr_matrix:
        return laplacian_matrix(self.n_nodes, self.edges, self.weights)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg


@dataclass
class GsaResult:
    """Denoised channels plus the learned metric and objective history."""

    denoised: np.ndarray  # (n_channels, T)
    metric: np.ndarray  # (3, 3)
    objective_trace: list = field(default_factory=list)  # value after init + each accepted step
    iterations: int = 0  # accepted metric updates


def node_features(values: np.ndarray) -> np.ndarray:
    """(time, channel, value) feature per node, each component scaled.

    Time maps to [0, 1], the channel index maps to [0, 1], and values are
    z-scored over the whole recording so the kernel sees comparable ranges.
    """
    values = as_channel_matrix(values, "values")
    c, t = values.shape
    if t < 2:
        raise ParameterError(f"need at least 2 time samples, got {t}")
    time_feat = np.tile(np.arange(t) / (t - 1), c)
    chan_feat = np.repeat(np.arange(c) / max(c - 1, 1), t)
    std = values.std()
    val_feat = ((values - values.mean()) / std if std > 0 else np.zeros_like(values)).ravel()
    return np.column_stack([time_feat, chan_feat, val_feat])


def neighborhood_edges(n_channels: int, t: int, window: int) -> np.ndarray:
    """Temporal +-window edges per channel plus same-time edges across channels."""
    if window < 1:
        raise ParameterError(f"temporal window must be >= 1, got {window}")
    pairs = []
    base = np.arange(n_channels)[:, None] * t  # node id offset per channel
    for d in range(1, min(window, t - 1) + 1):
        starts = np.arange(t - d)
        i = (base + starts).ravel()
        pairs.append(np.column_stack([i, i + d]))
    times = np.arange(t)
    for a in range(n_channels):
        for b in range(a + 1, n_channels):
            pairs.append(np.column_stack([a * t + times, b * t + times]))
    return np.vstack(pairs) if pairs else np.empty((0, 2), dtype=int)


def dense_edges(n_nodes: int) -> np.ndarray:
    """All unordered node pairs; only sensible for small graphs."""
    i, j = np.triu_indices(n_nodes, k=1)
    return np.column_stack([i, j])


def edge_weights(features: np.ndarray, edges: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """exp(-df' M df) per edge; equals 1 when the endpoint features coincide."""
    if edges.shape[0] == 0:
        return np.zeros(0)
    df = features[edges[:, 0]] - features[edges[:, 1]]
    quad = np.einsum("ek,kl,el->e", df, metric, df)
    return np.exp(-quad)


def laplacian_matrix(n_nodes: int, edges: np.ndarray, weights: np.ndarray) -> sp.csr_matrix:
    deg = np.zeros(n_nodes)
    np.add.at(deg, edges[:, 0], weights)
    np.add.at(deg, edges[:, 1], weights)
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n_nodes)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n_nodes)])
    data = np.concatenate([-weights, -weights, deg])
    return sp.csr_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))


def build_graph(
    clean,
    mu: float = DEFAULT_MU,
    window: int = DEFAULT_WINDOW,
    dense: bool = False,
    metric: np.ndarray | None = None,
) -> BreathGraph:
    """Build the node/edge structure for a (n_channels, T) value matrix."""
    values = clean.values if isinstance(clean, CleanChannels) else as_channel_matrix(clean, "clean")
    if mu < 0:
        raise ParameterError(f"mu must be nonnegative, got {mu}")
    c, t = values.shape
    feats = node_features(values)
    edges = dense_edges(c * t) if dense else neighborhood_edges(c, t, window)
    m = np.eye(3) if metric is None else np.asarray(metric, dtype=float)
    if m.shape != (3, 3):
        raise ParameterError(f"metric must be 3x3, got shape {m.shape}")
    weights = edge_weights(feats, edges, m)
    return BreathGraph(
        n_nodes=c * t, features=feats, edges=edges, weights=weights, metric=m, mu=mu, shape=(c, t)
    )


def solve_map(
    graph: BreathGraph,
    y: np.ndarray,
    x0: np.ndarray | None = None,
    rtol: float = 1e-8,
    max_iter: int | None = None,
    lap: sp.csr_matrix | None = None,
) -> np.ndarray:
    """Solve (I + mu L) x = y by Jacobi-preconditioned conjugate gradient.

    Guarantees ||(I + mu L) x - y|| <= rtol * ||y|| or raises
    :class:`NumericalError` with the achieved residual. A prebuilt Laplacian
    may be passed to avoid reassembling it.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != graph.n_nodes:
        raise ParameterError(f"y has {y.size} entries for a {graph.n_nodes}-node graph")
    if lap is None:
        lap = graph.laplacian()
    a = sp.identity(graph.n_nodes, format="csr") + graph.mu * lap
    return _pcg(a, y, x0=x0, rtol=rtol, max_iter=max_iter)


def _pcg(a: sp.csr_matrix, y: np.ndarray, x0=None, rtol=1e-8, max_iter=None) -> np.ndarray:
    n = y.size
    bnorm = float(np.linalg.norm(y))
    if bnorm == 0.0:
        return np.zeros(n)
    tol = rtol * bnorm
    if max_iter is None:
        max_iter = 10 * n + 200

    dinv = 1.0 / a.diagonal()
    x = y.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    r = y - a @ x
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(max_iter):
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol:
            break
        ap = a @ p
        denom = float(p @ ap)
        if denom <= 0:
            raise NumericalError("conjugate gradient hit a non-positive curvature direction")
        alpha = rz / denom
        x += alpha * p
        r -= alpha * ap
        if (k + 1) % 50 == 0:
            r = y - a @ x  # periodically refresh to cancel accumulated drift
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    residual = float(np.linalg.norm(y - a @ x))
    if residual > tol:
        raise NumericalError(
            f"conjugate gradient stalled: residual {residual:.3e} > tolerance {tol:.3e} "
            f"after {max_iter} iterations"
        )
    return x


def metric_gradient(graph: BreathGraph, x: np.ndarray) -> np.ndarray:
    """Gradient of Q(M) = x' L(M) x with respect to the metric entries.

    With each undirected edge counted once, Q(M) = sum_e w_e (x_i - x_j)^2
    and dQ/dM_mn = -sum_e df_m df_n w_e (x_i - x_j)^2.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise ParameterError("x must be finite")
    if graph.edges.shape[0] == 0:
        return np.zeros((3, 3))
    df = graph.features[graph.edges[:, 0]] - graph.features[graph.edges[:, 1]]
    dx2 = (x[graph.edges[:, 0]] - x[graph.edges[:, 1]]) ** 2
    return -np.einsum("em,en,e->mn", df, df, graph.weights * dx2)


def project_psd(s: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive-semidefinite matrix: clamp eigenvalues at 0."""
    s = np.asarray(s, dtype=float)
    s = (s + s.T) / 2.0
    vals, vecs = np.linalg.eigh(s)
    out = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return (out + out.T) / 2.0


def map_objective(y: np.ndarray, x: np.ndarray, lap: sp.csr_matrix, mu: float) -> float:
    diff = y - x
    return float(diff @ diff + mu * (x @ (lap @ x)))


def denoise(
    clean,
    mu: float = DEFAULT_MU,
    window: int = DEFAULT_WINDOW,
    alpha0: float = DEFAULT_ALPHA0,
    step_up: float = DEFAULT_STEP_UP,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    dense: bool = False,
) -> GsaResult:
    """Alternate the MAP solve with projected-gradient metric updates.

    A metric step is accepted only when the objective under the rebuilt
    weights decreases; the step size then grows by ``step_up``, otherwise it
    halves and the previous state is kept. Stops on ``max_iters`` attempts,
    a relative decrease below ``tol``, or a stalled step size.
    """
    if isinstance(clean, CleanChannels):
        values, usable, active = _usable_values(clean)
    else:
        values = as_channel_matrix(clean, "clean")
        usable = np.ones(values.shape[0], dtype=bool)
        active = values
    if max_iters < 0:
        raise ParameterError(f"max_iters must be >= 0, got {max_iters}")
    if not (alpha0 > 0 and step_up > 1.0 and tol >= 0):
        raise ParameterError("need alpha0 > 0, step_up > 1 and tol >= 0")

    graph = build_graph(active, mu=mu, window=window, dense=dense)
    y = active.ravel()
    lap = graph.laplacian()
    x = solve_map(graph, y, lap=lap)
    obj = map_objective(y, x, lap, mu)
    trace = [obj]

    metric = graph.metric
    alpha = None  # scaled to the first gradient: "initialised heuristically"
    accepted = 0
    for _ in range(max_iters):
        grad = metric_gradient(graph, x)
        if alpha is None:
            alpha = alpha0 / (1.0 + float(np.linalg.norm(grad)))
        candidate = project_psd(metric - alpha * grad)
        weights = edge_weights(graph.features, graph.edges, candidate)
        cand_lap = laplacian_matrix(graph.n_nodes, graph.edges, weights)
        cand_graph = BreathGraph(
            n_nodes=graph.n_nodes,
            features=graph.features,
            edges=graph.edges,
            weights=weights,
            metric=candidate,
            mu=mu,
            shape=graph.shape,
        )
        x_cand = solve_map(cand_graph, y, x0=x, lap=cand_lap)
        obj_cand = map_objective(y, x_cand, cand_lap, mu)
        if obj_cand < obj:
            rel_drop = (obj - obj_cand) / max(abs(obj), 1e-300)
            graph, lap, metric, x, obj = cand_graph, cand_lap, candidate, x_cand, obj_cand
            trace.append(obj)
            accepted += 1
            alpha *= step_up
            if rel_drop < tol:
                break
        else:
            alpha /= 2.0
            if alpha < _MIN_STEP:
                break

    if any(b > a for a, b in zip(trace, trace[1:])):
        raise NumericalError("objective trace increased on an accepted step")

    denoised = np.zeros_like(values)
    denoised[usable] = x.reshape(active.shape)
    return GsaResult(denoised=denoised, metric=metric, objective_trace=trace, iterations=accepted)


def _usable_values(clean: CleanChannels):
    usable = clean.usable
    if not usable.any():
        raise ParameterError("no usable channel to denoise")
    return clean.values, usable, clean.values[usable]


class GraphDenoiser(TransformerMixin, BaseEstimator):
    """Sklearn-style transformer wrapping :func:`denoise`.

    ``transform`` maps a (n_channels, T) matrix (or a sequence of them) to
    the denoised matrix; the learned metric and objective trace of the last
    call are exposed as ``metric_`` and ``objective_trace_``.
    """

    def __init__(
        self,
        mu=DEFAULT_MU,
        window=DEFAULT_WINDOW,
        alpha0=DEFAULT_ALPHA0,
        step_up=DEFAULT_STEP_UP,
        max_iters=DEFAULT_MAX_ITERS,
        tol=DEFAULT_TOL,
        dense=False,
    ):
        self.mu = mu
        self.window = window
        self.alpha0 = alpha0
        self.step_up = step_up
        self.max_iters = max_iters
        self.tol = tol
        self.dense = dense

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        if isinstance(X, np.ndarray) and X.ndim <= 2:
            return self._transform_one(X)
        return [self._transform_one(item) for item in X]

    def _transform_one(self, X):
        result = denoise(
            X,
            mu=self.mu,
            window=self.window,
            alpha0=self.alpha0,
            step_up=self.step_up,
            max_iters=self.max_iters,
            tol=self.tol,
            dense=self.dense,
        )
        self.metric_ = result.metric
        self.objective_trace_ = result.objective_trace
        return result.denoised
