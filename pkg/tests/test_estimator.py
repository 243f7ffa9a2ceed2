import numpy as np
import pytest

from natcf.data import Dataset
from natcf.errors import InsufficientData, ZeroStd
from natcf.estimator import (
    PREFIX,
    FitConfig,
    column_stats,
    fit_location_scale,
)
from natcf.bench import gen_toy
from natcf.graph import CausalGraph
from natcf.scm import abduct, evaluate, sample


def make_graph(nodes, parents):
    return CausalGraph(tuple(nodes), parents)


def linear_dataset(rng, n=10_000, coef=2.0):
    x = rng.normal(size=n)
    v = coef * x + rng.normal(size=n)
    return Dataset(("x", "v"), np.column_stack([x, v]))


class TestColumnStats:
    def test_two_point_column(self):
        data = Dataset(("a",), np.array([[0.0], [2.0]]))
        s = column_stats(data)
        assert s.mean["a"] == 1.0
        assert s.std["a"] == 1.0  # population std

    def test_constant_column_rejected(self):
        data = Dataset(("a",), np.ones((50, 1)))
        with pytest.raises(ZeroStd):
            column_stats(data)

    def test_toy1_std_close_to_unit(self):
        _, train, _ = gen_toy(1, 10_000, seed=0)
        s = column_stats(train)
        assert s.std["n1"] == pytest.approx(1.0, abs=0.03)

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientData):
            column_stats(Dataset(("a",), np.zeros((1, 1))))


class TestFitLocationScale:
    def test_linear_consistency(self, rng):
        data = linear_dataset(rng)
        graph = make_graph(["x", "v"], {"x": (), "v": ("x",)})
        fitted = fit_location_scale(data, graph, FitConfig(degree=3))
        mech = fitted.mechanisms["v"]
        _, partials = mech.g_value_and_partials({"x": 0.0})
        assert partials["x"] == pytest.approx(2.0, abs=0.05)
        assert mech.scale == pytest.approx(1.0, abs=0.05)

    def test_root_variable_mean_and_std(self, rng):
        data = linear_dataset(rng)
        graph = make_graph(["x", "v"], {"x": (), "v": ("x",)})
        fitted = fit_location_scale(data, graph, FitConfig())
        root = fitted.mechanisms["x"]
        assert root.forward([], 0.0) == pytest.approx(float(np.mean(data.column("x"))))
        assert root.scale == pytest.approx(float(np.std(data.column("x"))))

    def test_toy1_n2_coefficients(self):
        true_scm, train, _ = gen_toy(1, 10_000, seed=0)
        fitted = fit_location_scale(train, true_scm.graph, FitConfig(degree=3))
        mech = fitted.mechanisms["n2"]
        _, partials = mech.g_value_and_partials({"n1": 0.0})
        assert partials["n1"] == pytest.approx(-1.0, abs=0.05)
        assert mech.scale == pytest.approx(1.0 / 3.0, abs=0.02)

    def test_fitted_scm_round_trips(self):
        true_scm, train, _ = gen_toy(1, 5_000, seed=2)
        fitted = fit_location_scale(train, true_scm.graph, FitConfig(degree=3))
        data = sample(fitted, 200, seed=5)
        for i in (0, 10, 151):
            row = data.row(i)
            back = evaluate(fitted, abduct(fitted, row))
            assert back == pytest.approx(row, abs=1e-9)

    def test_prefix_conditioning_adds_inputs(self):
        true_scm, train, _ = gen_toy(3, 5_000, seed=1)
        fitted = fit_location_scale(
            train, true_scm.graph, FitConfig(degree=2, conditioning=PREFIX)
        )
        assert fitted.mechanisms["n3"].parent_order == ("n1", "n2")
        assert fitted.graph.parents["n4"] == ("n1", "n2", "n3")
        # graph nodes and causal order unchanged
        assert fitted.graph.nodes == true_scm.graph.nodes
        assert fitted.topo == true_scm.topo

    def test_insufficient_rows_rejected(self, rng):
        data = linear_dataset(rng, n=20)
        graph = make_graph(["x", "v"], {"x": (), "v": ("x",)})
        with pytest.raises(InsufficientData):
            fit_location_scale(data, graph, FitConfig(degree=3))

    def test_sin_features(self, rng):
        n = 8_000
        x = rng.normal(size=n) * 1.5
        v = np.sin(2.0 * x) + 0.3 * rng.normal(size=n)
        data = Dataset(("x", "v"), np.column_stack([x, v]))
        graph = make_graph(["x", "v"], {"x": (), "v": ("x",)})
        fitted = fit_location_scale(
            data, graph, FitConfig(degree=1, sin_frequencies=(2.0,))
        )
        assert fitted.mechanisms["v"].scale == pytest.approx(0.3, abs=0.05)

    def test_column_mismatch(self, rng):
        data = linear_dataset(rng, n=200)
        graph = make_graph(["a", "b"], {"a": (), "b": ("a",)})
        with pytest.raises(InsufficientData):
            fit_location_scale(data, graph, FitConfig())
