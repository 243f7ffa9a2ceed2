import pytest

from natcf.engine import natural_cf, nonbacktracking_cf
from natcf.fio import ChangeRequest, FioConfig
from natcf.graph import ancestors_including, descendant_weights
from natcf.naturalness import is_epsilon_natural
from natcf.scm import evaluate

SIN_PI_8 = 0.3826834323650898
SIN_PI_4 = 0.7071067811865476

CFG = FioConfig()


class TestNonBacktracking:
    def test_hand_example_from_origin(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.0, "n2": 0.0, "n3": 0.0})
        ans = nonbacktracking_cf(toy1, evidence, ChangeRequest("n2", 1.0))
        assert ans.point["n1"] == 0.0
        assert ans.point["n2"] == 1.0
        assert ans.point["n3"] == pytest.approx(SIN_PI_8, abs=1e-15)

    def test_null_intervention_preserves_evidence(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.7, "n2": -0.1, "n3": 0.4})
        ans = nonbacktracking_cf(toy1, evidence, ChangeRequest("n2", evidence["n2"]))
        assert ans.point == pytest.approx(evidence, abs=1e-12)

    def test_hand_example_with_upstream_kept(self, toy1):
        evidence = evaluate(toy1, {"n1": 1.0, "n2": 0.0, "n3": 0.0})
        assert evidence["n2"] == -1.0
        ans = nonbacktracking_cf(toy1, evidence, ChangeRequest("n2", 0.0))
        assert ans.point["n1"] == 1.0
        assert ans.point["n3"] == pytest.approx(SIN_PI_4, abs=1e-12)

    def test_target_exact(self, toy1, rng):
        names = list(toy1.graph.nodes)
        for _ in range(20):
            u = {n: float(x) for n, x in zip(names, rng.normal(size=3))}
            evidence = evaluate(toy1, u)
            a_star = float(rng.normal())
            ans = nonbacktracking_cf(toy1, evidence, ChangeRequest("n2", a_star))
            assert ans.point["n2"] == a_star


class TestNatural:
    def test_degenerates_to_do_bit_for_bit(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.0, "n2": 0.0, "n3": 0.0})
        change = ChangeRequest("n2", 0.3)
        nb = nonbacktracking_cf(toy1, evidence, change)
        nat = natural_cf(toy1, evidence, change, CFG)
        assert nat.feasible
        assert nat.fio.lbf_targets == {"n2": 0.3}
        assert nat.point == nb.point

    def test_factual_change_returns_evidence(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.2, "n2": 0.1, "n3": -0.3})
        ans = natural_cf(toy1, evidence, ChangeRequest("n2", evidence["n2"]), CFG)
        assert ans.point == pytest.approx(evidence, abs=1e-12)

    def test_backtracking_keeps_joint_support(self, toy1):
        # Mirrors the single-sample walkthrough evidence (-0.59, 0.71, -0.37):
        # a change far outside joint support backtracks into n1.
        evidence = {"n1": -0.59, "n2": 0.71, "n3": -0.37}
        big_change = ChangeRequest("n2", 2.4)
        nat = natural_cf(toy1, evidence, big_change, CFG)
        assert nat.feasible
        assert "n1" in nat.fio.lbf_targets
        assert nat.point["n2"] == 2.4
        assert nat.point["n1"] < evidence["n1"]  # moved to keep u2 in range

    def test_walkthrough_change_is_feasible_and_in_support(self, toy1):
        # Under the exact ground-truth mechanisms, change(n2=0.19) from the
        # walkthrough evidence keeps (n1, n2) in joint support without any
        # backtracking (u2* = 3*(0.19 - 0.59) = -1.2).
        evidence = {"n1": -0.59, "n2": 0.71, "n3": -0.37}
        nat = natural_cf(toy1, evidence, ChangeRequest("n2", 0.19), CFG)
        assert nat.feasible
        assert nat.fio.lbf_targets == {"n2": 0.19}
        assert is_epsilon_natural(toy1, nat.point, {"n2"}, CFG.measure, CFG.epsilon)

    def test_feasible_answer_is_epsilon_natural(self, toy1, rng):
        names = list(toy1.graph.nodes)
        for _ in range(15):
            u = {n: float(x) for n, x in zip(names, rng.normal(size=3))}
            evidence = evaluate(toy1, u)
            ans = natural_cf(
                toy1, evidence, ChangeRequest("n2", float(rng.normal())), CFG
            )
            if ans.feasible:
                assert is_epsilon_natural(
                    toy1, ans.point, {"n2"}, CFG.measure, CFG.epsilon
                )

    def test_infeasible_carries_diagnostics(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.0, "n2": 0.0, "n3": 0.0})
        ans = natural_cf(
            toy1, evidence, ChangeRequest("n2", 0.1), FioConfig(epsilon=0.49)
        )
        assert not ans.feasible
        assert ans.point is None
        assert ans.fio.penalty_residual > 0

    def test_downstream_consistency(self, toy3, rng):
        # Non-descendants of the intervention set keep their evidence values.
        names = list(toy3.graph.nodes)
        for _ in range(10):
            u = {n: float(x) for n, x in zip(names, rng.normal(size=4))}
            evidence = evaluate(toy3, u)
            ans = natural_cf(
                toy3, evidence, ChangeRequest("n3", float(rng.normal())), CFG
            )
            if not ans.feasible:
                continue
            moved = set(ans.fio.lbf_targets)
            keep = set(names)
            for m in moved:
                keep -= {m}
                keep -= {
                    d for d in names
                    if m in ancestors_including(toy3.graph, {d}) and d != m
                }
            for name in keep:
                assert ans.point[name] == pytest.approx(evidence[name], abs=1e-12)

    def test_hard_constraint_in_answers(self, toy2, rng):
        for _ in range(25):
            u = {"n1": float(rng.normal()), "n2": float(rng.normal())}
            evidence = evaluate(toy2, u)
            a_star = float(rng.normal(scale=0.7))
            ans = natural_cf(toy2, evidence, ChangeRequest("n2", a_star), CFG)
            if ans.feasible:
                assert ans.point["n2"] == a_star

    def test_mechanism_distance_route(self, toy1):
        cfg = FioConfig(distance="mechanism_cdf")
        evidence = evaluate(toy1, {"n1": 0.0, "n2": 0.0, "n3": 0.0})
        ans = natural_cf(toy1, evidence, ChangeRequest("n2", 3.0), cfg)
        assert ans.feasible
        w = descendant_weights(toy1.graph)
        assert w["n1"] == 3
        assert ans.fio.distance <= sum(w[v] for v in ("n1", "n2"))
