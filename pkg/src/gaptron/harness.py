"""Experiment orchestration: runs, bound checks, aggregation, CSV/summary output.

The closed-form regret terms checked here, with comparator norm U, feature
bound X, ball radius D, and horizon T:

    full information   logistic      K X^2 U^2 / ln2
                       hinge         K^2 X^2 U^2 / (2 (K-1))
                       smooth hinge  2 K X^2 U^2
    bandit             logistic      KXD min(max(2KXD/ln2, 2 sqrt(T/ln2)),
                                             KXD e^{2DX} / ln2)
                       hinge         max(K^3 X^2 D^2 / (K-1), 2 KXD sqrt(T/2))
                       smooth hinge  max(4 K^2 X^2 D^2,       2 KXD sqrt(2T))

Full-information expected mistakes are exact (the weight trajectory never
depends on the sampled label), so the mistake-bound audit there is
deterministic.  Bandit runs are aggregated over seeds and compared with a
3-standard-error slack.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .environments import LabeledStream
from .learner import (
    BanditFeedback,
    FeedbackMode,
    FullInfoFeedback,
    Gaptron,
    GaptronConfig,
    RoundAudit,
    derive_hyperparams,
)
from .linalg import WeightMatrix
from .losses import LossFamily

GAP_TOLERANCE = 1e-9
BOUND_SLACK = 1e-6

ROUND_CSV_COLUMNS = (
    "t",
    "a_t",
    "mix",
    "expected_mistake",
    "realized_mistake",
    "learner_loss",
    "comparator_loss",
    "grad_norm_sq",
    "surrogate_gap",
    "conditional_gap",
)

FIGURE1_CSV_COLUMNS = ("z", "green", "red", "blue")


class HarnessError(ValueError):
    """Configuration/stream mismatch or violated run precondition."""


class BoundViolationError(AssertionError):
    """A theorem inequality failed under theorem settings."""


def full_info_regret(
    loss: LossFamily, n_classes: int, x_bound: float, comparator_norm: float
) -> float:
    k = n_classes
    u2 = comparator_norm**2
    x2 = x_bound**2
    if loss is LossFamily.LOGISTIC:
        return k * x2 * u2 / math.log(2.0)
    if loss is LossFamily.HINGE:
        return k**2 * x2 * u2 / (2.0 * (k - 1))
    if loss is LossFamily.SMOOTH_HINGE:
        return 2.0 * k * x2 * u2
    raise ValueError(f"unknown loss family: {loss!r}")


def bandit_regret(
    loss: LossFamily, n_classes: int, x_bound: float, radius: float, horizon: int
) -> float:
    k = n_classes
    x2 = x_bound**2
    d2 = radius**2
    kxd = k * x_bound * radius
    ln2 = math.log(2.0)
    t = float(horizon)
    if loss is LossFamily.LOGISTIC:
        grow = math.exp(2.0 * radius * x_bound)
        return kxd * min(
            max(2.0 * kxd / ln2, 2.0 * math.sqrt(t / ln2)), kxd * grow / ln2
        )
    if loss is LossFamily.HINGE:
        return max(k**3 * x2 * d2 / (k - 1), 2.0 * kxd * math.sqrt(t / 2.0))
    if loss is LossFamily.SMOOTH_HINGE:
        return max(4.0 * k**2 * x2 * d2, 2.0 * kxd * math.sqrt(2.0 * t))
    raise ValueError(f"unknown loss family: {loss!r}")


@dataclass(frozen=True)
class RunResult:
    config: GaptronConfig
    audits: tuple[RoundAudit, ...]
    expected_mistakes: float
    realized_mistakes: float
    comparator_loss: float
    comparator_norm: float
    theorem_bound: float
    gap_violations: int
    eta: float
    gamma: float

    @property
    def regret_actual(self) -> float:
        return self.expected_mistakes - self.comparator_loss

    @property
    def bound_holds(self) -> bool:
        return (
            self.expected_mistakes
            <= self.comparator_loss + self.theorem_bound + BOUND_SLACK
        )


@dataclass(frozen=True)
class BanditAggregate:
    config: GaptronConfig
    runs: tuple[RunResult, ...]
    mean_realized_mistakes: float
    stderr_realized_mistakes: float
    mean_comparator_loss: float
    theorem_bound: float
    gap_violations: int

    @property
    def regret_actual(self) -> float:
        return self.mean_realized_mistakes - self.mean_comparator_loss

    @property
    def bound_holds(self) -> bool:
        slack = 3.0 * self.stderr_realized_mistakes + BOUND_SLACK
        return (
            self.mean_realized_mistakes
            <= self.mean_comparator_loss + self.theorem_bound + slack
        )


def _resolve_comparator(
    config: GaptronConfig, stream: LabeledStream, comparator: WeightMatrix | None
) -> WeightMatrix:
    if comparator is None:
        comparator = stream.comparator
    if comparator is None:
        raise HarnessError("stream has no comparator and none was supplied")
    # re-wrap against the learner's ball; rejects comparators outside radius
    try:
        return WeightMatrix(comparator.rows, config.radius)
    except ValueError as exc:
        raise HarnessError(f"comparator infeasible: {exc}") from exc


def _check_stream(config: GaptronConfig, stream: LabeledStream) -> None:
    if stream.n_classes > config.n_classes:
        raise HarnessError(
            f"stream labels reach {stream.n_classes} but config has "
            f"{config.n_classes} classes"
        )
    if stream.examples and stream.examples[0].features.shape[0] != config.n_features:
        raise HarnessError(
            f"stream has {stream.examples[0].features.shape[0]} features, "
            f"config expects {config.n_features}"
        )


def run_full_info(
    config: GaptronConfig,
    stream: LabeledStream,
    comparator: WeightMatrix | None = None,
    enforce_bound: bool | None = None,
) -> RunResult:
    """Run one full-information trajectory and audit the mistake bound.

    ``enforce_bound`` defaults to the config's theorem-settings flag; when
    enforced, a violated bound raises :class:`BoundViolationError`.
    """
    if config.feedback is not FeedbackMode.FULL_INFO:
        raise HarnessError("run_full_info needs a full-information config")
    _check_stream(config, stream)
    comparator = _resolve_comparator(config, stream, comparator)
    learner = Gaptron(config)
    audits = []
    for example in stream.examples:
        learner.predict(example.features)
        audits.append(
            learner.update(FullInfoFeedback(example.label), comparator=comparator)
        )
    result = _collect(config, audits, comparator)
    if enforce_bound is None:
        enforce_bound = config.theorem_settings
    if enforce_bound and not result.bound_holds:
        raise BoundViolationError(
            f"expected mistakes {result.expected_mistakes:.6f} exceed "
            f"comparator loss {result.comparator_loss:.6f} + bound "
            f"{result.theorem_bound:.6f}"
        )
    return result


def _collect(config, audits, comparator) -> RunResult:
    expected = sum(a.expected_mistake for a in audits) if audits else 0.0
    realized = sum(a.realized_mistake for a in audits) if audits else 0.0
    comp_loss = sum(a.comparator_loss for a in audits) if audits else 0.0
    if config.feedback is FeedbackMode.FULL_INFO:
        bound = full_info_regret(
            config.loss, config.n_classes, config.x_bound, comparator.norm
        )
        gap_values = [a.surrogate_gap for a in audits]
    else:
        bound = bandit_regret(
            config.loss,
            config.n_classes,
            config.x_bound,
            config.radius,
            config.horizon,
        )
        gap_values = [a.conditional_gap for a in audits]
    violations = sum(1 for g in gap_values if g is not None and g > GAP_TOLERANCE)
    eta, gamma = derive_hyperparams(config)
    return RunResult(
        config=config,
        audits=tuple(audits),
        expected_mistakes=float(expected),
        realized_mistakes=float(realized),
        comparator_loss=float(comp_loss),
        comparator_norm=comparator.norm,
        theorem_bound=float(bound),
        gap_violations=int(violations),
        eta=eta,
        gamma=gamma,
    )


def run_bandit(
    config: GaptronConfig,
    stream: LabeledStream,
    n_seeds: int,
    comparator: WeightMatrix | None = None,
    enforce_bound: bool | None = None,
) -> BanditAggregate:
    """Run independent bandit trajectories (seeds config.rng_seed + i).

    Reports mean and standard error of realized mistakes; the mean is
    compared against mean comparator loss + theorem bound + 3 standard
    errors.  Every trajectory carries the exact conditional-gap audit.
    """
    if config.feedback is not FeedbackMode.BANDIT:
        raise HarnessError("run_bandit needs a bandit config")
    if n_seeds < 1:
        raise HarnessError(f"need at least one seed, got {n_seeds}")
    if config.horizon is not None and config.horizon < len(stream.examples):
        raise HarnessError(
            f"config horizon {config.horizon} shorter than the stream "
            f"({len(stream.examples)} examples)"
        )
    _check_stream(config, stream)
    comparator = _resolve_comparator(config, stream, comparator)
    runs = []
    for i in range(n_seeds):
        cfg = replace(config, rng_seed=config.rng_seed + i)
        learner = Gaptron(cfg)
        audits = []
        for example in stream.examples:
            _, y_pred = learner.predict(example.features)
            feedback = BanditFeedback(
                correct=y_pred == example.label, true_label=example.label
            )
            audits.append(learner.update(feedback, comparator=comparator))
        runs.append(_collect(cfg, audits, comparator))
    realized = np.array([r.realized_mistakes for r in runs])
    mean = float(realized.mean())
    stderr = float(realized.std(ddof=1) / math.sqrt(n_seeds)) if n_seeds > 1 else 0.0
    aggregate = BanditAggregate(
        config=config,
        runs=tuple(runs),
        mean_realized_mistakes=mean,
        stderr_realized_mistakes=stderr,
        mean_comparator_loss=float(np.mean([r.comparator_loss for r in runs])),
        theorem_bound=runs[0].theorem_bound,
        gap_violations=int(sum(r.gap_violations for r in runs)),
    )
    if enforce_bound is None:
        enforce_bound = config.theorem_settings
    if enforce_bound and not aggregate.bound_holds:
        raise BoundViolationError(
            f"mean realized mistakes {aggregate.mean_realized_mistakes:.3f} exceed "
            f"mean comparator loss {aggregate.mean_comparator_loss:.3f} + bound "
            f"{aggregate.theorem_bound:.3f} + 3 stderr"
        )
    return aggregate


def figure1_curves(
    eta: float = 0.125,
    lo: float = -1.5,
    hi: float = 1.5,
    step: float = 0.01,
) -> list[tuple[float, float, float, float]]:
    """Binary-margin gap curves: (z, green, red, blue) per grid point.

    green is the smooth hinge value at margin z, red the zero-exploration gap
    curve 1[z <= 0] + (eta/2)||g||^2 with ||g||^2 = 4(1-z)^2 for z > 0 and 4
    otherwise, and blue the gap-map curve
    (1 - (1-|z|)^2) 1[z <= 0] + (1-|z|)^2 / 2 + (eta/2)||g||^2.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    n = int(round((hi - lo) / step)) + 1
    rows = []
    for i in range(n):
        z = round(lo + i * step, 12)  # keep decimal grid points exact
        grad_sq = 4.0 * (1.0 - z) ** 2 if z > 0 else 4.0
        penalty = 0.5 * eta * grad_sq
        green = 1.0 - 2.0 * z if z <= 0 else (1.0 - z) ** 2
        red = (1.0 if z <= 0 else 0.0) + penalty
        a = (1.0 - abs(z)) ** 2
        blue = (1.0 - a) * (1.0 if z <= 0 else 0.0) + 0.5 * a + penalty
        rows.append((z, green, red, blue))
    return rows


# ---------------------------------------------------------------------- output


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_round_csv(result: RunResult, path: str) -> None:
    """Ten fixed columns, one row per round; conditional_gap is empty outside
    bandit runs."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(ROUND_CSV_COLUMNS)
            for a in result.audits:
                writer.writerow(
                    [
                        a.t,
                        _cell(a.a),
                        _cell(a.mix),
                        _cell(a.expected_mistake),
                        _cell(a.realized_mistake),
                        _cell(a.learner_loss),
                        _cell(a.comparator_loss),
                        _cell(a.grad_norm_sq),
                        _cell(a.surrogate_gap),
                        _cell(a.conditional_gap),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write round log {path!r}: {exc}") from exc


def emit_figure1_csv(rows, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(FIGURE1_CSV_COLUMNS)
            for row in rows:
                writer.writerow([_cell(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write figure grid {path!r}: {exc}") from exc


def format_summary(result: RunResult | BanditAggregate, n_seeds: int = 1) -> str:
    """key=value lines: bound, losses, mistakes, violations, config echo."""
    config = result.config
    lines = [
        f"bound={result.theorem_bound!r}",
        f"gap_violations={result.gap_violations}",
        f"bound_holds={str(result.bound_holds).lower()}",
        f"regret_actual={result.regret_actual!r}",
    ]
    if isinstance(result, BanditAggregate):
        lines += [
            f"l_t={result.mean_comparator_loss!r}",
            f"m_t={result.mean_realized_mistakes!r}",
            f"stderr={result.stderr_realized_mistakes!r}",
            f"seeds={len(result.runs)}",
        ]
        eta, gamma = result.runs[0].eta, result.runs[0].gamma
    else:
        lines += [
            f"l_t={result.comparator_loss!r}",
            f"m_t={result.expected_mistakes!r}",
            f"realized_mistakes={result.realized_mistakes!r}",
            f"seeds={n_seeds}",
        ]
        eta, gamma = result.eta, result.gamma
    lines += [
        f"loss={config.loss.value}",
        f"feedback={config.feedback.value}",
        f"k={config.n_classes}",
        f"d={config.n_features}",
        f"x_bound={config.x_bound!r}",
        f"radius={config.radius!r}",
        f"horizon={config.horizon if config.horizon is not None else ''}",
        f"eta={eta!r}",
        f"gamma={gamma!r}",
        f"beta={config.beta!r}" if config.beta is not None else "beta=",
        f"rng_seed={config.rng_seed}",
    ]
    return "\n".join(lines) + "\n"


def emit_summary(result: RunResult | BanditAggregate, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(format_summary(result))
    except OSError as exc:
        raise OSError(f"cannot write summary {path!r}: {exc}") from exc
