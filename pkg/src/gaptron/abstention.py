"""Binary prediction with expert advice and an abstain option.

An AdaHedge mixture over d experts produces a hedged prediction
``yhat = <weights, expert predictions>`` in [-1, 1]; the learner predicts
``sign(yhat)`` with probability ``1 - b`` and abstains (paying the round's
cost) with probability ``b = 1 - |yhat|``.  Losses are half the prediction
error, ``(1 - y * y') / 2``, so experts' losses live in [0, 1].

AdaHedge internals follow the usual parameter-free recipe: the learning rate
is ln(d) divided by the cumulative mixability gap, where the round's gap is
``<w, losses> + (1/eta) * ln <w, exp(-eta * losses)>``; a zero cumulative gap
means follow-the-leader (uniform over the loss minimizers).

The audits check, path-wise, that when every abstention cost is below 1/2 the
cumulative expected loss stays within a constant of the best expert, and that
the per-round abstention gap

    (1 - b) * loss(sign) + c * b + eta * v - loss(yhat)

is nonpositive for eta = 1 - 2c once v is replaced by its upper bound
``(1 - |yhat|) / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

GAP_TOLERANCE = 1e-9

ABSTENTION_CSV_COLUMNS = (
    "t",
    "b_t",
    "expected_loss",
    "cum_expected_loss",
    "best_expert_loss_so_far",
    "bound",
)


class AbstentionCostError(ValueError):
    """An abstention cost of 1/2 or more voids the constant-regret audit."""


@dataclass(frozen=True)
class ExpertRound:
    predictions: np.ndarray  # each in [-1, 1]
    label: int  # -1 or +1
    cost: float  # abstention cost in [0, 1]

    def __post_init__(self) -> None:
        preds = np.asarray(self.predictions, dtype=np.float64)
        if preds.ndim != 1 or preds.shape[0] < 1:
            raise ValueError("need at least one expert prediction")
        if np.max(np.abs(preds)) > 1.0 + 1e-12:
            raise ValueError("expert predictions must lie in [-1, 1]")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if not 0.0 <= self.cost <= 1.0:
            raise ValueError(f"cost must lie in [0, 1], got {self.cost}")
        object.__setattr__(self, "predictions", preds)


@dataclass
class AdaHedgeState:
    cum_losses: np.ndarray  # per-expert cumulative loss
    cum_gap: float  # nondecreasing cumulative mixability gap
    rounds: int = 0

    @classmethod
    def fresh(cls, n_experts: int) -> "AdaHedgeState":
        if n_experts < 1:
            raise ValueError("need at least one expert")
        return cls(cum_losses=np.zeros(n_experts), cum_gap=0.0)

    @property
    def n_experts(self) -> int:
        return self.cum_losses.shape[0]


def adahedge_weights(state: AdaHedgeState) -> np.ndarray:
    """Current expert distribution; min-subtracted for stability."""
    losses = state.cum_losses
    d = losses.shape[0]
    if state.cum_gap == 0.0:
        leaders = losses == losses.min()
        return leaders / leaders.sum()
    eta = math.log(d) / state.cum_gap
    shifted = np.exp(-eta * (losses - losses.min()))
    return shifted / shifted.sum()


def _mix_loss(weights: np.ndarray, losses: np.ndarray, eta: float) -> float:
    if eta == math.inf:
        active = weights > 0.0
        return float(losses[active].min())
    if eta <= 0.0:  # single expert: ln(d) = 0
        return float(np.dot(weights, losses))
    low = float(losses.min())
    inner = float(np.dot(weights, np.exp(-eta * (losses - low))))
    return low - math.log(inner) / eta


def _update(state: AdaHedgeState, weights: np.ndarray, losses: np.ndarray) -> float:
    """Feed one loss vector to AdaHedge; returns the round's mixability gap."""
    d = state.n_experts
    eta = math.inf if state.cum_gap == 0.0 else math.log(d) / state.cum_gap
    hedge = float(np.dot(weights, losses))
    gap = max(hedge - _mix_loss(weights, losses, eta), 0.0)
    state.cum_losses = state.cum_losses + losses
    state.cum_gap += gap
    return gap


@dataclass(frozen=True)
class AbstentionOutcome:
    t: int
    weights: np.ndarray
    hedge_pred: float  # yhat
    y_star: int  # sign(yhat), sign(0) = +1
    b: float  # abstention probability
    abstained: bool
    prediction: int | None  # None when abstaining
    label: int
    realized_loss: float
    expected_loss: float  # (1 - b) 1[y* != y] + b c, no sampling noise
    hedge_loss: float  # loss of yhat == weighted expert loss
    variance: float  # v_t under the expert distribution
    cost: float
    expert_losses: np.ndarray


def abstention_round(
    state: AdaHedgeState, expert_round: ExpertRound, rng: np.random.Generator
) -> AbstentionOutcome:
    """Play one round and feed the expert losses back to AdaHedge."""
    weights = adahedge_weights(state)
    preds = expert_round.predictions
    if preds.shape[0] != state.n_experts:
        raise ValueError(
            f"round has {preds.shape[0]} experts, state tracks {state.n_experts}"
        )
    y = expert_round.label
    yhat = float(np.dot(weights, preds))
    y_star = 1 if yhat >= 0.0 else -1
    b = min(max(1.0 - abs(yhat), 0.0), 1.0)
    abstained = bool(rng.random() < b)
    prediction = None if abstained else y_star
    sign_loss = 0.5 * (1.0 - y * y_star)
    realized_loss = expert_round.cost if abstained else sign_loss
    expert_losses = 0.5 * (1.0 - y * preds)
    hedge_loss = float(np.dot(weights, expert_losses))
    variance = float(np.dot(weights, (hedge_loss - expert_losses) ** 2))
    expected_loss = (1.0 - b) * sign_loss + b * expert_round.cost
    state.rounds += 1
    _update(state, weights, expert_losses)
    return AbstentionOutcome(
        t=state.rounds,
        weights=weights,
        hedge_pred=yhat,
        y_star=y_star,
        b=b,
        abstained=abstained,
        prediction=prediction,
        label=y,
        realized_loss=realized_loss,
        expected_loss=expected_loss,
        hedge_loss=hedge_loss,
        variance=variance,
        cost=expert_round.cost,
        expert_losses=expert_losses,
    )


def abstention_gap(outcome: AbstentionOutcome, eta: float) -> float:
    """Per-round gap with the variance replaced by its (1 - |yhat|)/2 bound."""
    mistake = 0.5 * (1.0 - outcome.label * outcome.y_star)
    v_bound = 0.5 * (1.0 - abs(outcome.hedge_pred))
    return (
        (1.0 - outcome.b) * mistake
        + outcome.cost * outcome.b
        + eta * v_bound
        - outcome.hedge_loss
    )


@dataclass(frozen=True)
class AbstentionTrace:
    outcomes: tuple[AbstentionOutcome, ...]
    final_state: AdaHedgeState
    n_experts: int


@dataclass(frozen=True)
class Theorem7Report:
    learner_loss: float
    best_expert_loss: float
    slack_term: float
    bound: float
    holds: bool
    hedge_regret: float
    hedge_bound: float
    hedge_holds: bool
    max_abstention_gap: float
    abstention_gap_holds: bool
    n_rounds: int
    n_experts: int


def theorem7_audit(trace: AbstentionTrace) -> Theorem7Report:
    """Constant-regret audit; refuses runs with any abstention cost >= 1/2."""
    costs = [o.cost for o in trace.outcomes]
    if not costs:
        raise ValueError("empty trace")
    c_max = max(costs)
    if c_max >= 0.5:
        raise AbstentionCostError(
            f"audit requires every cost below 0.5, got max {c_max}"
        )
    d = trace.n_experts
    log_d = math.log(d)
    learner = sum(o.expected_loss for o in trace.outcomes)
    best = float(trace.final_state.cum_losses.min())
    v_total = sum(o.variance for o in trace.outcomes)
    slack = min(log_d / (1.0 - 2.0 * c_max), 2.0 * math.sqrt(log_d * v_total))
    bound = best + slack + (4.0 / 3.0) * log_d + 2.0
    hedge_total = sum(o.hedge_loss for o in trace.outcomes)
    hedge_bound = 2.0 * math.sqrt(log_d * v_total) + (4.0 / 3.0) * log_d + 2.0
    hedge_regret = hedge_total - best
    gaps = [abstention_gap(o, eta=1.0 - 2.0 * o.cost) for o in trace.outcomes]
    max_gap = max(gaps)
    return Theorem7Report(
        learner_loss=learner,
        best_expert_loss=best,
        slack_term=slack,
        bound=bound,
        holds=learner <= bound + GAP_TOLERANCE,
        hedge_regret=hedge_regret,
        hedge_bound=hedge_bound,
        hedge_holds=hedge_regret <= hedge_bound + GAP_TOLERANCE,
        max_abstention_gap=max_gap,
        abstention_gap_holds=max_gap <= GAP_TOLERANCE,
        n_rounds=len(trace.outcomes),
        n_experts=d,
    )


def simulate(
    n_experts: int, horizon: int, cost: float, rng_seed: int = 0
) -> AbstentionTrace:
    """Random labels, experts of mixed skill, a constant abstention cost.

    Expert i predicts ``skill_i * y + (1 - skill_i) * noise``, so predictions
    stay in [-1, 1] and skills spread the expert losses.
    """
    rng = np.random.default_rng(rng_seed)
    skills = rng.uniform(0.0, 0.6, size=n_experts)
    state = AdaHedgeState.fresh(n_experts)
    outcomes = []
    for _ in range(horizon):
        y = 1 if rng.random() < 0.5 else -1
        noise = rng.uniform(-1.0, 1.0, size=n_experts)
        preds = skills * y + (1.0 - skills) * noise
        expert_round = ExpertRound(predictions=preds, label=y, cost=cost)
        outcomes.append(abstention_round(state, expert_round, rng))
    return AbstentionTrace(
        outcomes=tuple(outcomes), final_state=state, n_experts=n_experts
    )


def emit_abstention_csv(trace: AbstentionTrace, path: str) -> None:
    """Six columns; the bound column is the running constant-regret bound."""
    d = trace.n_experts
    log_d = math.log(d)
    cum_losses = np.zeros(d)
    cum_expected = 0.0
    v_so_far = 0.0
    c_max = 0.0
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(ABSTENTION_CSV_COLUMNS)
            for o in trace.outcomes:
                cum_losses = cum_losses + o.expert_losses
                cum_expected += o.expected_loss
                v_so_far += o.variance
                c_max = max(c_max, o.cost)
                best = float(cum_losses.min())
                if c_max < 0.5:
                    slack = min(
                        log_d / (1.0 - 2.0 * c_max),
                        2.0 * math.sqrt(log_d * v_so_far),
                    )
                else:
                    slack = 2.0 * math.sqrt(log_d * v_so_far)
                bound = best + slack + (4.0 / 3.0) * log_d + 2.0
                writer.writerow(
                    [
                        o.t,
                        repr(o.b),
                        repr(o.expected_loss),
                        repr(cum_expected),
                        repr(best),
                        repr(bound),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write abstention log {path!r}: {exc}") from exc
