import pytest

from natcf.errors import TooManyDimensions
from natcf.fio import ChangeRequest, FioConfig, solve
from natcf.oracle import GridSpec, grid_solve
from natcf.scm import evaluate, sample


CFG = FioConfig(epsilon=1e-2)


class TestGridSolve:
    def test_factual_change_is_grid_adjacent(self, toy2):
        evidence = evaluate(toy2, {"n1": 0.4, "n2": 0.1})
        res = grid_solve(toy2, evidence, ChangeRequest("n2", evidence["n2"]), CFG)
        assert res.feasible
        # one free dim at resolution 401: factual sits within half a cell
        cell = 2 * toy2.mechanisms["n1"].noise.quantile(1 - CFG.epsilon) / 400
        assert res.distance <= cell

    def test_unreachable_value_is_infeasible(self, toy2):
        # n2 = sin(...) + 0.2u with |sin| <= 1 and |u| <= 2.33 under the
        # 1e-2 box: nothing reaches 3.0.
        evidence = evaluate(toy2, {"n1": 0.0, "n2": 0.0})
        res = grid_solve(toy2, evidence, ChangeRequest("n2", 3.0), CFG)
        assert not res.feasible

    def test_deterministic_and_seed_free(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.5, "n2": -0.3, "n3": 0.2})
        a = grid_solve(toy1, evidence, ChangeRequest("n2", 1.5), CFG)
        b = grid_solve(toy1, evidence, ChangeRequest("n2", 1.5), CFG)
        assert a.to_dict() == b.to_dict()

    def test_too_many_dimensions(self, toy3):
        evidence = evaluate(toy3, {"n1": 0.0, "n2": 0.0, "n3": 0.0, "n4": 0.0})
        with pytest.raises(TooManyDimensions):
            grid_solve(
                toy3,
                evidence,
                ChangeRequest("n4", 0.5),
                CFG,
                GridSpec(max_dims=2),
            )

    def test_even_resolution_rejected(self):
        with pytest.raises(TooManyDimensions):
            GridSpec(resolution=400).validate()

    def test_refinement_never_worsens_much(self, toy1):
        evidence = evaluate(toy1, {"n1": 0.2, "n2": 0.0, "n3": 0.0})
        change = ChangeRequest("n2", 2.0)
        coarse = grid_solve(toy1, evidence, change, CFG, GridSpec(resolution=201))
        fine = grid_solve(toy1, evidence, change, CFG, GridSpec(resolution=401))
        assert coarse.feasible and fine.feasible
        assert fine.distance <= coarse.distance + 1e-12
        cell = 2 * 2.4 / 200  # one coarse cell, slope ~1 per free unit
        assert coarse.distance - fine.distance <= cell

    def test_three_free_dimensions_supported(self, toy3):
        evidence = evaluate(toy3, {"n1": 0.0, "n2": 0.0, "n3": 0.0, "n4": 0.0})
        res = grid_solve(
            toy3,
            evidence,
            ChangeRequest("n4", evidence["n4"]),
            CFG,
            GridSpec(resolution=41),
        )
        assert res.feasible
        assert res.distance <= 0.4

    def test_chunked_enumeration_matches_unchunked(self, toy3):
        evidence = evaluate(toy3, {"n1": 0.3, "n2": -0.1, "n3": 0.2, "n4": 0.0})
        change = ChangeRequest("n4", 0.9)
        small_chunks = grid_solve(
            toy3, evidence, change, CFG, GridSpec(resolution=21, chunk=100)
        )
        one_shot = grid_solve(
            toy3, evidence, change, CFG, GridSpec(resolution=21, chunk=10**7)
        )
        assert small_chunks.to_dict() == one_shot.to_dict()


class TestAgreementWithSolver:
    def test_agreement_on_toy1_sample(self, toy1):
        # Small pilot of the acceptance criterion: feasibility and distance
        # must line up with the exhaustive reference.
        cfg = FioConfig(epsilon=1e-2, restarts=4, seed=3)
        rows = sample(toy1, 40, seed=101)
        draws = sample(toy1, 40, seed=202).column("n2")
        disagreements = 0
        for i in range(40):
            evidence = rows.row(i)
            change = ChangeRequest("n2", float(draws[i]))
            s = solve(toy1, evidence, change, cfg)
            o = grid_solve(toy1, evidence, change, cfg)
            if s.feasible != o.feasible:
                disagreements += 1
            elif s.feasible:
                cell = 2 * 2.33 / 400
                assert abs(s.distance - o.distance) <= 1e-3 + 2 * cell
        assert disagreements == 0
