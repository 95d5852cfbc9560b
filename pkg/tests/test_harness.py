"""Tests for run orchestration, bounds, gap curves, and file output."""

import csv
import math

import numpy as np
import pytest

from gaptron.environments import StreamSpec, generate
from gaptron.harness import (
    BoundViolationError,
    FIGURE1_CSV_COLUMNS,
    HarnessError,
    ROUND_CSV_COLUMNS,
    bandit_regret,
    emit_figure1_csv,
    emit_round_csv,
    emit_summary,
    figure1_curves,
    format_summary,
    full_info_regret,
    run_bandit,
    run_full_info,
)
from gaptron.learner import FeedbackMode, GaptronConfig
from gaptron.linalg import WeightMatrix
from gaptron.losses import LossFamily


def full_info_config(loss, k=3, d=5, radius=2.0, **kw):
    return GaptronConfig(
        loss=loss, feedback=FeedbackMode.FULL_INFO, n_classes=k, n_features=d,
        radius=radius, x_bound=1.0, **kw,
    )


def bandit_config(loss, k=3, d=5, radius=2.0, horizon=300, **kw):
    return GaptronConfig(
        loss=loss, feedback=FeedbackMode.BANDIT, n_classes=k, n_features=d,
        radius=radius, x_bound=1.0, horizon=horizon, **kw,
    )


def small_stream(k=3, d=5, horizon=300, margin=0.3, u_norm=2.0, seed=5):
    return generate(StreamSpec(
        kind="separable", n_classes=k, n_features=d, x_bound=1.0,
        u_norm=u_norm, horizon=horizon, margin=margin, rng_seed=seed,
    ))


class TestBoundFormulas:
    def test_full_info_values(self):
        assert full_info_regret(LossFamily.LOGISTIC, 5, 1.0, 3.0) == pytest.approx(
            5 * 9 / math.log(2)
        )
        assert full_info_regret(LossFamily.HINGE, 5, 1.0, 3.0) == pytest.approx(
            25 * 9 / 8
        )
        assert full_info_regret(LossFamily.SMOOTH_HINGE, 5, 1.0, 3.0) == pytest.approx(
            2 * 5 * 9
        )

    def test_bandit_values(self):
        assert bandit_regret(LossFamily.HINGE, 3, 1.0, 3.0, 5000) == pytest.approx(
            max(27 * 9 / 2, 2 * 9 * math.sqrt(2500))
        )
        assert bandit_regret(
            LossFamily.SMOOTH_HINGE, 3, 1.0, 3.0, 5000
        ) == pytest.approx(max(4 * 81, 18 * math.sqrt(10000)))
        kxd = 3 * 1.0 * 3.0
        expected = kxd * min(
            max(2 * kxd / math.log(2), 2 * math.sqrt(5000 / math.log(2))),
            kxd * math.exp(6.0) / math.log(2),
        )
        assert bandit_regret(LossFamily.LOGISTIC, 3, 1.0, 3.0, 5000) == pytest.approx(
            expected
        )


class TestRunFullInfo:
    def test_empty_stream_gives_zero_totals(self):
        stream = small_stream(horizon=0)
        result = run_full_info(full_info_config(LossFamily.HINGE), stream)
        assert result.expected_mistakes == 0.0
        assert result.realized_mistakes == 0.0
        assert result.comparator_loss == 0.0
        assert result.gap_violations == 0

    def test_single_round_mixture_arithmetic(self):
        # zero weights, logistic, K=2: expected mistake is 0.25 when the tie
        # argmax equals the label, 0.75 otherwise
        stream = small_stream(k=2, d=3, horizon=1, margin=0.0, seed=9)
        cfg = full_info_config(LossFamily.LOGISTIC, k=2, d=3)
        result = run_full_info(cfg, stream)
        expected = 0.25 if stream.examples[0].label == 1 else 0.75
        assert result.expected_mistakes == pytest.approx(expected, abs=1e-12)

    def test_expected_mistakes_bounded_each_loss(self):
        stream = small_stream()
        for loss in LossFamily:
            cfg = full_info_config(loss)
            result = run_full_info(cfg, stream)
            assert result.bound_holds
            assert result.gap_violations == 0
            assert (
                result.expected_mistakes
                <= result.comparator_loss + result.theorem_bound + 1e-6
            )

    def test_trajectory_deterministic_in_expectation(self):
        stream = small_stream()
        cfg_a = full_info_config(LossFamily.SMOOTH_HINGE, rng_seed=1)
        cfg_b = full_info_config(LossFamily.SMOOTH_HINGE, rng_seed=2)
        ra = run_full_info(cfg_a, stream)
        rb = run_full_info(cfg_b, stream)
        assert ra.expected_mistakes == rb.expected_mistakes
        assert ra.comparator_loss == rb.comparator_loss

    def test_comparator_outside_ball_rejected(self):
        stream = small_stream(u_norm=2.0)
        cfg = full_info_config(LossFamily.HINGE, radius=1.0)
        with pytest.raises(HarnessError, match="infeasible"):
            run_full_info(cfg, stream)

    def test_missing_comparator_rejected(self, tmp_path):
        from gaptron.environments import load_stream, write_stream

        stream = small_stream(horizon=5)
        path = tmp_path / "s.csv"
        write_stream(stream, str(path))
        loaded = load_stream(str(path), x_bound=1.0)
        with pytest.raises(HarnessError, match="comparator"):
            run_full_info(full_info_config(LossFamily.HINGE), loaded)

    def test_inflated_eta_negative_control(self):
        stream = small_stream()
        base = full_info_config(LossFamily.SMOOTH_HINGE)
        from gaptron.learner import derive_hyperparams

        eta, _ = derive_hyperparams(base)
        control = full_info_config(LossFamily.SMOOTH_HINGE, eta_override=4 * eta)
        result = run_full_info(control, stream)  # bound not enforced: override
        assert result.gap_violations >= 1

    def test_wrong_feedback_mode_rejected(self):
        stream = small_stream()
        with pytest.raises(HarnessError):
            run_full_info(bandit_config(LossFamily.HINGE), stream)


class TestRunBandit:
    def test_reproducible_single_seed(self):
        stream = small_stream()
        cfg = bandit_config(LossFamily.HINGE, rng_seed=4)
        a = run_bandit(cfg, stream, n_seeds=1)
        b = run_bandit(cfg, stream, n_seeds=1)
        assert a.mean_realized_mistakes == b.mean_realized_mistakes
        assert a.stderr_realized_mistakes == 0.0

    def test_uniform_play_mistake_rate(self):
        # gamma forced to 1: every label is uniform, mean mistake rate (K-1)/K
        stream = small_stream(horizon=400)
        cfg = bandit_config(LossFamily.HINGE, horizon=400, gamma_override=1.0)
        agg = run_bandit(cfg, stream, n_seeds=16)
        rate = agg.mean_realized_mistakes / 400
        spread = 3 * agg.stderr_realized_mistakes / 400 + 1e-9
        assert abs(rate - 2.0 / 3.0) <= max(spread, 0.05)

    def test_bound_and_gap_audit(self):
        stream = small_stream(horizon=500, margin=1.0, u_norm=2.0, seed=11)
        for loss in (LossFamily.HINGE, LossFamily.SMOOTH_HINGE):
            cfg = bandit_config(loss, horizon=500)
            agg = run_bandit(cfg, stream, n_seeds=8)
            assert agg.gap_violations == 0
            assert agg.bound_holds

    def test_seed_count_validated(self):
        stream = small_stream()
        with pytest.raises(HarnessError):
            run_bandit(bandit_config(LossFamily.HINGE), stream, n_seeds=0)


class TestFigure1:
    def test_caption_values_at_zero(self):
        rows = figure1_curves(eta=0.125)
        at_zero = {z: (g, r, b) for z, g, r, b in rows}[0.0]
        green, red, blue = at_zero
        assert red == pytest.approx(1.25, abs=1e-12)
        assert blue == pytest.approx(0.75, abs=1e-12)
        assert green == pytest.approx(1.0, abs=1e-12)

    def test_zero_loss_point(self):
        rows = {z: (g, r, b) for z, g, r, b in figure1_curves(eta=0.125)}
        green, red, _ = rows[1.0]
        assert green == 0.0
        assert red == 0.0

    def test_blue_below_green_everywhere(self):
        for z, green, _red, blue in figure1_curves(eta=0.125):
            assert blue <= green + 1e-12, z

    def test_red_exceeds_green_only_near_zero(self):
        rows = figure1_curves(eta=0.125)
        above = [z for z, green, red, _ in rows if red > green + 1e-12]
        assert above
        assert min(above) >= -0.125 - 1e-9
        assert max(above) <= 0.125 + 1e-9

    def test_grid_is_inclusive(self):
        rows = figure1_curves(eta=0.125)
        zs = [row[0] for row in rows]
        assert len(zs) == 301
        assert zs[0] == -1.5 and zs[-1] == 1.5


class TestOutputs:
    def test_round_csv_schema(self, tmp_path):
        stream = small_stream(horizon=20)
        result = run_full_info(full_info_config(LossFamily.HINGE), stream)
        path = tmp_path / "rounds.csv"
        emit_round_csv(result, str(path))
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == ROUND_CSV_COLUMNS
        assert len(rows) == 21
        assert all(len(row) == 10 for row in rows)
        assert rows[1][-1] == ""  # conditional_gap empty in full info

    def test_round_csv_conditional_gap_filled_in_bandit(self, tmp_path):
        stream = small_stream(horizon=20)
        agg = run_bandit(bandit_config(LossFamily.HINGE, horizon=20), stream, 1)
        path = tmp_path / "rounds.csv"
        emit_round_csv(agg.runs[0], str(path))
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[1][-1] != ""

    def test_empty_result_gives_header_only(self, tmp_path):
        stream = small_stream(horizon=0)
        result = run_full_info(full_info_config(LossFamily.HINGE), stream)
        path = tmp_path / "rounds.csv"
        emit_round_csv(result, str(path))
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 1

    def test_figure1_csv(self, tmp_path):
        path = tmp_path / "fig.csv"
        emit_figure1_csv(figure1_curves(), str(path))
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == FIGURE1_CSV_COLUMNS
        assert len(rows) == 302

    def test_summary_keys(self, tmp_path):
        stream = small_stream(horizon=20)
        result = run_full_info(full_info_config(LossFamily.HINGE), stream)
        text = format_summary(result)
        for key in ("bound=", "l_t=", "m_t=", "regret_actual=", "gap_violations=",
                    "seeds=", "loss=hinge", "eta=", "gamma="):
            assert key in text
        path = tmp_path / "summary.txt"
        emit_summary(result, str(path))
        assert path.read_text().startswith("bound=")

    def test_io_error_carries_path(self, tmp_path):
        stream = small_stream(horizon=2)
        result = run_full_info(full_info_config(LossFamily.HINGE), stream)
        bad = tmp_path / "missing" / "rounds.csv"
        with pytest.raises(OSError, match="rounds.csv"):
            emit_round_csv(result, str(bad))


class TestLemma1Accounting:
    def test_total_mistake_decomposition(self):
        # M_T <= L_T + U^2/(2 eta) + gamma (K-1)/K T + sum of surrogate gaps
        stream = small_stream(horizon=200)
        for loss in LossFamily:
            cfg = full_info_config(loss)
            result = run_full_info(cfg, stream)
            gaps = sum(a.surrogate_gap for a in result.audits)
            rhs = (
                result.comparator_loss
                + result.comparator_norm**2 / (2 * result.eta)
                + gaps
            )
            assert result.expected_mistakes <= rhs + 1e-9
