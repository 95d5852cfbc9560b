"""Tests for AdaHedge with an abstain option."""

import math

import numpy as np
import pytest

from gaptron.abstention import (
    ABSTENTION_CSV_COLUMNS,
    AbstentionCostError,
    AbstentionTrace,
    AdaHedgeState,
    ExpertRound,
    abstention_gap,
    abstention_round,
    adahedge_weights,
    emit_abstention_csv,
    simulate,
    theorem7_audit,
)


def weights_replay_oracle(loss_history, n_experts):
    """Recompute the final weights from scratch out of the raw loss vectors."""
    cum = np.zeros(n_experts)
    gap_total = 0.0
    for losses in loss_history:
        if gap_total == 0.0:
            leaders = cum == cum.min()
            w = leaders / leaders.sum()
            eta = math.inf
        else:
            eta = math.log(n_experts) / gap_total
            shifted = np.exp(-eta * (cum - cum.min()))
            w = shifted / shifted.sum()
        hedge = float(np.dot(w, losses))
        if eta == math.inf:
            mix = float(losses[w > 0].min())
        elif eta <= 0.0:
            mix = hedge
        else:
            low = float(losses.min())
            mix = low - math.log(float(np.dot(w, np.exp(-eta * (losses - low))))) / eta
        gap_total += max(hedge - mix, 0.0)
        cum = cum + losses
    if gap_total == 0.0:
        leaders = cum == cum.min()
        return leaders / leaders.sum()
    eta = math.log(n_experts) / gap_total
    shifted = np.exp(-eta * (cum - cum.min()))
    return shifted / shifted.sum()


class TestAdaHedgeWeights:
    def test_first_round_uniform(self):
        state = AdaHedgeState.fresh(5)
        assert np.allclose(adahedge_weights(state), 0.2)

    def test_monotone_in_losses(self):
        state = AdaHedgeState(cum_losses=np.array([0.0, 10.0]), cum_gap=3.0)
        w = adahedge_weights(state)
        assert w[0] > w[1]
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_follow_the_leader_when_gap_zero(self):
        state = AdaHedgeState(cum_losses=np.array([2.0, 1.0, 1.0]), cum_gap=0.0)
        w = adahedge_weights(state)
        assert np.allclose(w, [0.0, 0.5, 0.5])

    def test_matches_replay_oracle(self):
        rng = np.random.default_rng(30)
        d = 6
        state = AdaHedgeState.fresh(d)
        history = []
        for _ in range(200):
            preds = rng.uniform(-1, 1, size=d)
            y = 1 if rng.random() < 0.5 else -1
            outcome = abstention_round(
                state, ExpertRound(preds, y, cost=0.3), rng
            )
            history.append(outcome.expert_losses)
        oracle = weights_replay_oracle(history, d)
        assert np.allclose(adahedge_weights(state), oracle, atol=1e-12)

    def test_cum_gap_nondecreasing(self):
        rng = np.random.default_rng(31)
        state = AdaHedgeState.fresh(4)
        last = 0.0
        for _ in range(100):
            preds = rng.uniform(-1, 1, size=4)
            y = 1 if rng.random() < 0.5 else -1
            abstention_round(state, ExpertRound(preds, y, cost=0.2), rng)
            assert state.cum_gap >= last
            last = state.cum_gap


class TestAbstentionRound:
    def test_disagreeing_experts_force_abstention(self):
        state = AdaHedgeState.fresh(2)
        rng = np.random.default_rng(0)
        outcome = abstention_round(
            state, ExpertRound(np.array([1.0, -1.0]), 1, cost=0.4), rng
        )
        assert outcome.hedge_pred == 0.0
        assert outcome.b == 1.0
        assert outcome.abstained
        assert outcome.prediction is None
        assert outcome.realized_loss == 0.4
        assert outcome.y_star == 1  # sign(0) = +1

    def test_unanimous_experts_predict_for_free(self):
        state = AdaHedgeState.fresh(3)
        rng = np.random.default_rng(0)
        outcome = abstention_round(
            state, ExpertRound(np.array([1.0, 1.0, 1.0]), 1, cost=0.4), rng
        )
        assert outcome.b == 0.0
        assert not outcome.abstained
        assert outcome.realized_loss == 0.0
        assert outcome.expected_loss == 0.0

    def test_hedge_loss_is_linear(self):
        # loss(yhat) equals the weighted expert loss
        state = AdaHedgeState.fresh(4)
        rng = np.random.default_rng(1)
        preds = np.array([0.5, -0.25, 1.0, 0.0])
        outcome = abstention_round(state, ExpertRound(preds, -1, cost=0.1), rng)
        assert outcome.hedge_loss == pytest.approx(
            0.5 * (1.0 - (-1) * outcome.hedge_pred), abs=1e-12
        )

    def test_variance_bounded_by_bhatia_davis(self):
        # v_t <= (1 - |yhat|) / 2 on random rounds
        rng = np.random.default_rng(32)
        state = AdaHedgeState.fresh(7)
        for _ in range(500):
            preds = rng.uniform(-1, 1, size=7)
            y = 1 if rng.random() < 0.5 else -1
            outcome = abstention_round(state, ExpertRound(preds, y, cost=0.3), rng)
            assert outcome.variance <= 0.5 * (1.0 - abs(outcome.hedge_pred)) + 1e-12

    def test_per_round_gap_nonpositive_below_critical_rate(self):
        rng = np.random.default_rng(33)
        state = AdaHedgeState.fresh(5)
        for _ in range(500):
            preds = rng.uniform(-1, 1, size=5)
            y = 1 if rng.random() < 0.5 else -1
            cost = float(rng.uniform(0.0, 0.49))
            outcome = abstention_round(state, ExpertRound(preds, y, cost=cost), rng)
            eta_max = 1.0 - 2.0 * cost
            for eta in (eta_max, 0.5 * eta_max, 0.1 * eta_max):
                assert abstention_gap(outcome, eta) <= 1e-9

    def test_expert_count_mismatch_rejected(self):
        state = AdaHedgeState.fresh(3)
        with pytest.raises(ValueError, match="experts"):
            abstention_round(
                state, ExpertRound(np.array([1.0, -1.0]), 1, 0.1),
                np.random.default_rng(0),
            )


class TestTheorem7Audit:
    def test_constant_regret_on_random_instance(self):
        trace = simulate(n_experts=10, horizon=3000, cost=0.4, rng_seed=2)
        report = theorem7_audit(trace)
        assert report.holds
        assert report.hedge_holds
        assert report.abstention_gap_holds
        expected_slack = min(
            math.log(10) / 0.2,
            2.0 * math.sqrt(math.log(10) * sum(o.variance for o in trace.outcomes)),
        )
        assert report.slack_term == pytest.approx(expected_slack)

    def test_single_expert_bound_reduces_to_constant(self):
        trace = simulate(n_experts=1, horizon=500, cost=0.3, rng_seed=3)
        report = theorem7_audit(trace)
        # ln(1) = 0: bound is best expert + 2
        assert report.bound == pytest.approx(report.best_expert_loss + 2.0)
        assert report.holds

    def test_cost_scaling_of_constant_term(self):
        # ln(d)/(1-2c) scales as predicted between two cost levels
        t_low = simulate(n_experts=10, horizon=2000, cost=0.01, rng_seed=4)
        t_high = simulate(n_experts=10, horizon=2000, cost=0.49, rng_seed=4)
        log_d = math.log(10)
        assert log_d / (1 - 2 * 0.01) == pytest.approx(log_d / 0.98)
        assert log_d / (1 - 2 * 0.49) == pytest.approx(log_d / 0.02)
        low = theorem7_audit(t_low)
        high = theorem7_audit(t_high)
        assert low.holds and high.holds
        # the high-cost run can only use the variance branch when it is smaller
        assert high.slack_term <= log_d / 0.02 + 1e-12

    def test_refuses_costs_at_half(self):
        trace = simulate(n_experts=4, horizon=50, cost=0.5, rng_seed=5)
        with pytest.raises(AbstentionCostError):
            theorem7_audit(trace)

    def test_deterministic_expected_loss_accounting(self):
        a = simulate(n_experts=6, horizon=400, cost=0.25, rng_seed=6)
        b = simulate(n_experts=6, horizon=400, cost=0.25, rng_seed=6)
        assert sum(o.expected_loss for o in a.outcomes) == pytest.approx(
            sum(o.expected_loss for o in b.outcomes), abs=0.0
        )


class TestAbstentionCsv:
    def test_schema_and_running_bound(self, tmp_path):
        import csv as csv_mod

        trace = simulate(n_experts=5, horizon=50, cost=0.3, rng_seed=7)
        path = tmp_path / "abstention.csv"
        emit_abstention_csv(trace, str(path))
        with open(path, newline="") as handle:
            rows = list(csv_mod.reader(handle))
        assert tuple(rows[0]) == ABSTENTION_CSV_COLUMNS
        assert len(rows) == 51
        assert all(len(row) == 6 for row in rows)
        final = rows[-1]
        report = theorem7_audit(trace)
        assert float(final[3]) == pytest.approx(report.learner_loss)
        assert float(final[5]) == pytest.approx(report.bound)
