import numpy as np
import pytest
from sklearn.base import clone

from gaitbreath.errors import NumericalError, ParameterError
from gaitbreath.graph_denoise import (
    BreathGraph,
    GraphDenoiser,
    build_graph,
    denoise,
    edge_weights,
    laplacian_matrix,
    map_objective,
    metric_gradient,
    neighborhood_edges,
    node_features,
    project_psd,
    solve_map,
)
from gaitbreath.preprocess import CleanChannels


def two_node_graph(weight=1.0, mu=1.0, features=None):
    feats = np.zeros((2, 3)) if features is None else features
    edges = np.array([[0, 1]])
    return BreathGraph(
        n_nodes=2,
        features=feats,
        edges=edges,
        weights=np.array([weight], dtype=float),
        metric=np.eye(3),
        mu=mu,
        shape=(1, 2),
    )


def random_graph(rng, max_nodes=500):
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, 3 * n + 1))
    i = rng.integers(0, n, size=m)
    j = rng.integers(0, n, size=m)
    keep = i != j
    if not keep.any():
        i, j = np.array([0]), np.array([1])
    else:
        i, j = i[keep], j[keep]
    edges = np.unique(np.sort(np.column_stack([i, j]), axis=1), axis=0)
    weights = rng.uniform(0.01, 2.0, size=edges.shape[0])
    mu = float(rng.uniform(0.0, 10.0))
    return BreathGraph(
        n_nodes=n,
        features=rng.normal(size=(n, 3)),
        edges=edges,
        weights=weights,
        metric=np.eye(3),
        mu=mu,
        shape=(1, n),
    )


class TestBuildGraph:
    def test_identical_features_weight_one(self):
        feats = np.tile([0.4, 0.2, -1.3], (2, 1))
        w = edge_weights(feats, np.array([[0, 1]]), np.eye(3))
        assert w[0] == 1.0

    def test_zero_metric_weight_one(self):
        rng = np.random.default_rng(0)
        g = build_graph(rng.normal(size=(3, 10)), metric=np.zeros((3, 3)), window=3)
        assert np.allclose(g.weights, 1.0)

    def test_unit_feature_distance(self):
        feats = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        w = edge_weights(feats, np.array([[0, 1]]), np.eye(3))
        assert w[0] == pytest.approx(np.exp(-1.0), abs=1e-15)

    def test_neighborhood_edge_count(self):
        c, t, w = 2, 6, 2
        edges = neighborhood_edges(c, t, w)
        temporal = c * sum(t - d for d in range(1, w + 1))
        cross = t * c * (c - 1) // 2
        assert edges.shape[0] == temporal + cross
        assert (edges[:, 0] < edges[:, 1]).all()

    def test_dense_mode(self):
        g = build_graph(np.random.default_rng(1).normal(size=(2, 4)), dense=True)
        assert g.edges.shape[0] == 8 * 7 // 2

    def test_laplacian_properties(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            g = random_graph(rng, max_nodes=40)
            lap = g.laplacian()
            ones = np.ones(g.n_nodes)
            assert np.abs(lap @ ones).max() < 1e-10
            for _ in range(10):
                x = rng.normal(size=g.n_nodes)
                assert x @ (lap @ x) >= -1e-10

    def test_node_features_ranges(self):
        rng = np.random.default_rng(3)
        feats = node_features(rng.normal(size=(6, 50)))
        assert feats[:, 0].min() == 0.0 and feats[:, 0].max() == 1.0
        assert feats[:, 1].min() == 0.0 and feats[:, 1].max() == 1.0
        assert abs(feats[:, 2].mean()) < 1e-12
        assert abs(feats[:, 2].std() - 1.0) < 1e-12


class TestSolveMap:
    def test_mu_zero_identity(self):
        g = two_node_graph(mu=0.0)
        y = np.array([3.7, -1.2])
        assert np.array_equal(solve_map(g, y), y)

    def test_two_node_closed_form(self):
        g = two_node_graph(weight=1.0, mu=1.0)
        x = solve_map(g, np.array([1.0, 0.0]))
        assert np.abs(x - np.array([2.0 / 3.0, 1.0 / 3.0])).max() < 1e-12

    def test_constant_vector_fixed_point(self):
        g = two_node_graph(weight=0.8, mu=5.0)
        y = np.full(2, 4.2)
        assert np.abs(solve_map(g, y) - y).max() < 1e-12

    def test_residual_bound_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            g = random_graph(rng, max_nodes=200)
            y = rng.normal(size=g.n_nodes)
            x = solve_map(g, y)
            a = np.eye(g.n_nodes) + g.mu * g.laplacian().toarray()
            assert np.linalg.norm(a @ x - y) <= 1e-8 * np.linalg.norm(y)

    def test_nonconvergence_reports_residual(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, max_nodes=100)
        g = BreathGraph(g.n_nodes, g.features, g.edges, g.weights, g.metric, 1e6, g.shape)
        y = rng.normal(size=g.n_nodes)
        with pytest.raises(NumericalError, match="residual"):
            solve_map(g, y, max_iter=1)

    def test_size_mismatch(self):
        with pytest.raises(ParameterError):
            solve_map(two_node_graph(), np.zeros(3))


class TestMetricGradient:
    def test_constant_signal_zero_gradient(self):
        rng = np.random.default_rng(0)
        g = build_graph(rng.normal(size=(2, 6)), window=2)
        grad = metric_gradient(g, np.full(g.n_nodes, 3.3))
        assert np.allclose(grad, 0.0)

    def test_single_edge_closed_form(self):
        feats = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        m = np.eye(3)
        g = BreathGraph(
            n_nodes=2,
            features=feats,
            edges=np.array([[0, 1]]),
            weights=edge_weights(feats, np.array([[0, 1]]), m),
            metric=m,
            mu=1.0,
            shape=(1, 2),
        )
        grad = metric_gradient(g, np.array([1.0, 0.0]))
        assert grad[0, 0] == pytest.approx(-np.exp(-1.0), abs=1e-15)
        grad[0, 0] = 0.0
        assert np.allclose(grad, 0.0)

    def test_matches_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            values = rng.normal(size=(2, 5))  # 10-node graph
            base = build_graph(values, mu=0.7, window=2)
            x = rng.normal(size=base.n_nodes)
            m0 = project_psd(rng.normal(size=(3, 3)))
            g = BreathGraph(
                base.n_nodes,
                base.features,
                base.edges,
                edge_weights(base.features, base.edges, m0),
                m0,
                0.7,
                base.shape,
            )
            analytic = metric_gradient(g, x)

            def q(m):
                w = edge_weights(base.features, base.edges, m)
                return float(x @ (laplacian_matrix(base.n_nodes, base.edges, w) @ x))

            h = 1e-6
            fd = np.zeros((3, 3))
            for a in range(3):
                for b in range(3):
                    mp, mm = m0.copy(), m0.copy()
                    mp[a, b] += h
                    mm[a, b] -= h
                    fd[a, b] = (q(mp) - q(mm)) / (2 * h)
            rel = np.abs(analytic - fd).max() / max(np.abs(fd).max(), 1e-12)
            assert rel < 1e-4


class TestProjectPsd:
    def test_diagonal_clamp(self):
        out = project_psd(np.diag([1.0, -2.0, 3.0]))
        assert np.allclose(out, np.diag([1.0, 0.0, 3.0]), atol=1e-12)

    def test_psd_fixed_point(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(3, 3))
        m = a @ a.T
        assert np.abs(project_psd(m) - m).max() < 1e-12

    def test_offdiagonal_example(self):
        s = np.zeros((3, 3))
        s[0, 1] = s[1, 0] = 2.0
        out = project_psd(s)
        expected = np.zeros((3, 3))
        expected[:2, :2] = 1.0
        assert np.abs(out - expected).max() < 1e-12

    def test_idempotent_and_psd(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            s = rng.normal(size=(3, 3)) * rng.uniform(0.1, 10)
            p = project_psd(s)
            assert np.linalg.eigvalsh(p).min() >= -1e-12
            assert np.abs(project_psd(p) - p).max() < 1e-12


class TestDenoise:
    def pure_sines(self, fs=30.0, seconds=12.0):
        t = np.arange(int(seconds * fs)) / fs
        amps = (1.0, 0.95, 1.05, 0.9, 1.1, 1.0)
        return np.vstack([a * np.sin(2 * np.pi * 0.3 * t) for a in amps]), t

    def test_pure_sine_high_correlation(self):
        values, _ = self.pure_sines()
        result = denoise(values)
        for c in range(6):
            assert np.corrcoef(result.denoised[c], values[c])[0, 1] > 0.99

    def test_large_mu_reaches_consensus(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=(6, 30))
        result = denoise(values, mu=1e6, max_iters=0)
        assert result.denoised.var() <= 1e-3 * values.var()
        # oracle: the direct dense solve agrees
        g = build_graph(values, mu=1e6)
        a = np.eye(g.n_nodes) + 1e6 * g.laplacian().toarray()
        direct = np.linalg.solve(a, values.ravel())
        assert np.abs(result.denoised.ravel() - direct).max() < 1e-6

    def test_max_iters_zero_equals_identity_metric_solve(self):
        values, _ = self.pure_sines(seconds=6.0)
        result = denoise(values, max_iters=0)
        g = build_graph(values)
        x = solve_map(g, values.ravel())
        assert np.array_equal(result.denoised.ravel(), x)
        assert result.iterations == 0
        assert np.array_equal(result.metric, np.eye(3))

    def test_objective_trace_non_increasing(self):
        rng = np.random.default_rng(5)
        values, _ = self.pure_sines(seconds=8.0)
        values = values + 0.3 * rng.normal(size=values.shape)
        result = denoise(values)
        trace = result.objective_trace
        assert len(trace) == result.iterations + 1
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_objective_bounded_by_trivial_points(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=(6, 40))
        y = values.ravel()
        result = denoise(values, max_iters=10)
        g = build_graph(values, metric=result.metric)
        lap = g.laplacian()
        obj_star = map_objective(y, result.denoised.ravel(), lap, g.mu)
        assert obj_star <= map_objective(y, y, lap, g.mu) + 1e-9
        assert obj_star <= float(y @ y) + 1e-9  # objective at x = 0

    def test_unusable_channels_left_zero(self):
        values, _ = self.pure_sines(seconds=6.0)
        clean = CleanChannels(
            frame_rate=30.0,
            values=values,
            usable=np.array([True, True, False, True, True, True]),
        )
        result = denoise(clean)
        assert np.allclose(result.denoised[2], 0.0)
        assert np.corrcoef(result.denoised[0], values[0])[0, 1] > 0.99


class TestGraphDenoiser:
    def test_transform_and_attributes(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(3, 40))
        est = GraphDenoiser(max_iters=3)
        out = est.fit_transform(values)
        assert out.shape == values.shape
        assert est.metric_.shape == (3, 3)
        assert len(est.objective_trace_) >= 1

    def test_clone_keeps_params(self):
        est = clone(GraphDenoiser(mu=0.7, window=4))
        assert est.get_params()["mu"] == 0.7
        assert est.get_params()["window"] == 4
