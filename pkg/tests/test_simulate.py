import json
import math

import pytest

from semimatch import (
    ModelSpec,
    round_budget,
    run_simulation,
    solve_unweighted,
    solve_weighted_congest,
    verify_message_budget,
)
from semimatch.simulate import (
    ALGORITHMS,
    BandwidthExceededError,
    ModelMismatchError,
    SimTrace,
)
from conftest import random_unit, random_weighted


class TestModelSpec:
    def test_congest_bandwidth(self):
        spec = ModelSpec("CONGEST", bandwidth_constant=32)
        assert spec.bandwidth_bits(16) == 32 * 4

    def test_local_unbounded(self):
        assert ModelSpec("LOCAL").bandwidth_bits(16) is None

    def test_bad_model(self):
        with pytest.raises(ValueError):
            ModelSpec("PRAM")

    def test_bad_constant(self):
        with pytest.raises(ValueError):
            ModelSpec("CONGEST", bandwidth_constant=0)


class TestRoundBudget:
    def test_congest_formula(self):
        # n = 16: logn = 4, k = 17, per matching 17^3 * 4, schedule has 5 budgets
        assert round_budget("congest-unweighted", 16, ModelSpec()) == 5 * 17**3 * 4

    def test_local_formula(self):
        # base n = 16, expanded 32: k(32)^2 * 5 + k(16)^2 * 4
        spec = ModelSpec("LOCAL")
        assert round_budget("local-weighted", 16, spec, n_expanded=32) == 21**2 * 5 + 17**2 * 4

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            round_budget("nope", 8, ModelSpec())


class TestRunSimulation:
    @pytest.mark.parametrize("seed", range(10))
    def test_congest_unweighted_charge_matches_budget(self, seed):
        inst = random_unit(seed, nc=10, ns=6, p=0.5)
        model = ModelSpec("CONGEST")
        result, trace = run_simulation(inst, "congest-unweighted", model)
        assert trace.charged_rounds == round_budget("congest-unweighted", inst.n, model)
        assert verify_message_budget(trace, model)

    @pytest.mark.parametrize("seed", range(5))
    def test_congest_weighted(self, seed):
        inst = random_weighted(seed, nc=8, ns=4, max_weight=8)
        model = ModelSpec("CONGEST")
        result, trace = run_simulation(inst, "congest-weighted", model)
        assert trace.charged_rounds == round_budget("congest-weighted", inst.n, model)
        # parallel classes: still only one schedule's worth of matching phases
        matching_phases = [p for p in trace.phases if p["rounds"] > 0]
        assert len(matching_phases) == max(1, math.ceil(math.log2(inst.n))) + 1

    @pytest.mark.parametrize("seed", range(5))
    def test_local_weighted(self, seed):
        inst = random_weighted(seed, nc=8, ns=4, max_weight=8)
        model = ModelSpec("LOCAL")
        result, trace = run_simulation(inst, "local-weighted", model)
        expected = round_budget("local-weighted", inst.n, model, n_expanded=trace.n_expanded)
        assert trace.charged_rounds == expected

    def test_congest_backup(self):
        inst = random_unit(3, nc=6, ns=5, p=0.9)
        model = ModelSpec("CONGEST")
        result, trace = run_simulation(inst, "congest-backup", model, r=2)
        assert trace.charged_rounds == round_budget("congest-backup", inst.n, model)
        assert len(trace.messages) == 2 * len(inst.clients)

    def test_result_identical_to_direct_solver(self):
        inst = random_unit(5, nc=10, ns=4, p=0.5)
        direct, _ = solve_unweighted(inst)
        simulated, _ = run_simulation(inst, "congest-unweighted", ModelSpec("CONGEST"))
        assert simulated.mapping == direct.mapping

    def test_weighted_result_identical(self):
        inst = random_weighted(5)
        direct = solve_weighted_congest(inst)
        simulated, _ = run_simulation(inst, "congest-weighted", ModelSpec("CONGEST"))
        assert simulated.mapping == direct.mapping

    def test_seed_does_not_change_result(self):
        inst = random_unit(2, nc=10, ns=4, p=0.5)
        a, ta = run_simulation(inst, "congest-unweighted", ModelSpec("CONGEST"), seed=0)
        b, tb = run_simulation(inst, "congest-unweighted", ModelSpec("CONGEST"), seed=99)
        assert a.mapping == b.mapping
        assert ta.to_json() == tb.to_json()

    def test_model_mismatch(self, chain):
        with pytest.raises(ModelMismatchError):
            run_simulation(chain, "congest-unweighted", ModelSpec("LOCAL"))
        with pytest.raises(ModelMismatchError):
            run_simulation(chain, "local-weighted", ModelSpec("CONGEST"))

    def test_unknown_algorithm(self, chain):
        with pytest.raises(ValueError):
            run_simulation(chain, "nope", ModelSpec("CONGEST"))

    def test_announce_messages(self, chain):
        _, trace = run_simulation(chain, "congest-unweighted", ModelSpec("CONGEST"))
        assert len(trace.messages) == len(chain.clients)
        assert all(m["round"] == trace.charged_rounds for m in trace.messages)
        assert trace.phases[-1] == {"label": "announce", "rounds": 0}


class TestBandwidth:
    def test_emit_over_limit_raises(self):
        trace = SimTrace("congest-unweighted", 8, 8)
        with pytest.raises(BandwidthExceededError):
            trace.emit(1, (0, 4), bits=1000, limit=96)

    def test_verify_message_budget_local_always_true(self, chain):
        _, trace = run_simulation(chain, "local-weighted", ModelSpec("LOCAL"))
        assert verify_message_budget(trace, ModelSpec("LOCAL"))

    def test_verify_detects_violation(self):
        trace = SimTrace("congest-unweighted", 8, 8)
        trace.messages.append({"round": 0, "edge": [0, 1], "bits": 10**6})
        assert not verify_message_budget(trace, ModelSpec("CONGEST"))


class TestTraceSerialization:
    def test_write_and_shape(self, tmp_path, chain):
        _, trace = run_simulation(chain, "congest-unweighted", ModelSpec("CONGEST"))
        path = tmp_path / "trace.json"
        trace.write(path)
        doc = json.loads(path.read_text())
        assert set(doc) == {
            "algorithm", "n", "nExpanded", "chargedRounds", "phases", "simulatedMessages",
        }
        assert doc["algorithm"] == "congest-unweighted"
        assert doc["chargedRounds"] == sum(p["rounds"] for p in doc["phases"])

    def test_algorithm_names_stable(self):
        assert ALGORITHMS == (
            "congest-unweighted", "congest-weighted", "local-weighted", "congest-backup",
        )
