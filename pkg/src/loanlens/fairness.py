"""Fairness and accuracy metrics: disparate impact, balanced accuracy,
unfairness ratio, and the overview counters.

Disparate impact follows the four-fifths rule: the protected group's
acceptance rate divided by the reference group's, with anything strictly
below 0.8 flagged as unfair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .dataset import ACCEPTED, REJECTED, Application, Dataset
from .errors import ContractError, UndefinedRatioError
from .feedback import (
    AdjustedDecisionSet,
    FairnessJudgment,
    WeightSuggestion,
    effective_judgments,
    effective_suggestions,
    session_mean_weights,
)
from .model import Prediction, ScoringModel, predict, predict_with_weights

DI_THRESHOLD = 0.8
FAIR = "fair"
UNFAIR = "unfair"


@dataclass(frozen=True)
class GroupSpec:
    """A protected category of one attribute versus all its other categories."""

    attribute: str
    protected_value: str
    reference_values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "reference_values", tuple(self.reference_values))
        if self.protected_value in self.reference_values:
            raise ContractError("protected value cannot also be a reference value")
        if not self.reference_values:
            raise ContractError("group spec needs at least one reference value")


def group_spec_for(dataset_or_model, attribute: str, protected_value: str) -> GroupSpec:
    spec = dataset_or_model.spec(attribute)
    if not spec.is_categorical:
        raise ContractError(f"group attribute {attribute!r} must be categorical")
    if protected_value not in spec.categories:
        raise ContractError(
            f"{protected_value!r} is not a category of {attribute!r}"
        )
    return GroupSpec(
        attribute=attribute,
        protected_value=protected_value,
        reference_values=tuple(c for c in spec.categories if c != protected_value),
    )


@dataclass(frozen=True)
class GroupCounts:
    accepted: int
    rejected: int

    @property
    def total(self) -> int:
        return self.accepted + self.rejected

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.total


@dataclass(frozen=True)
class FairnessReport:
    group: GroupSpec
    disparate_impact: float
    protected_accept_rate: float
    reference_accept_rate: float
    verdict: str
    protected_counts: GroupCounts
    reference_counts: GroupCounts

    def to_dict(self) -> dict:
        return {
            "group_attribute": self.group.attribute,
            "protected_value": self.group.protected_value,
            "reference_values": list(self.group.reference_values),
            "disparate_impact": self.disparate_impact,
            "protected_accept_rate": self.protected_accept_rate,
            "reference_accept_rate": self.reference_accept_rate,
            "verdict": self.verdict,
            "protected_counts": {
                "accepted": self.protected_counts.accepted,
                "rejected": self.protected_counts.rejected,
            },
            "reference_counts": {
                "accepted": self.reference_counts.accepted,
                "rejected": self.reference_counts.rejected,
            },
        }

    def render_text(self) -> str:
        g = self.group
        lines = [
            f"Disparate impact on {g.attribute} "
            f"({g.protected_value} vs {'/'.join(g.reference_values)})",
            f"  {g.protected_value:<16} accepted {self.protected_counts.accepted:>5} / "
            f"{self.protected_counts.total:<5} rate {self.protected_accept_rate:.4f}",
            f"  {'reference':<16} accepted {self.reference_counts.accepted:>5} / "
            f"{self.reference_counts.total:<5} rate {self.reference_accept_rate:.4f}",
            f"  DI = {self.disparate_impact:.4f}  ->  verdict: {self.verdict} "
            f"(threshold {DI_THRESHOLD})",
        ]
        return "\n".join(lines)


def disparate_impact(
    decisions: Iterable[tuple[str, str]], group: GroupSpec
) -> FairnessReport:
    """``decisions`` pairs each row's group-membership label with its
    decision. DI = accept_rate(protected) / accept_rate(reference); the
    verdict is unfair exactly when DI < 0.8.
    """
    p_acc = p_rej = r_acc = r_rej = 0
    for membership, decision in decisions:
        if decision not in (ACCEPTED, REJECTED):
            raise ContractError(f"bad decision {decision!r}")
        if membership == group.protected_value:
            if decision == ACCEPTED:
                p_acc += 1
            else:
                p_rej += 1
        elif membership in group.reference_values:
            if decision == ACCEPTED:
                r_acc += 1
            else:
                r_rej += 1
        else:
            raise ContractError(
                f"membership {membership!r} is neither protected nor reference"
            )
    protected = GroupCounts(p_acc, p_rej)
    reference = GroupCounts(r_acc, r_rej)
    if protected.total == 0 or reference.total == 0:
        raise ContractError("both groups must be nonempty")
    if reference.accept_rate == 0.0:
        raise UndefinedRatioError("reference group accepts nobody; DI undefined")
    di = protected.accept_rate / reference.accept_rate
    return FairnessReport(
        group=group,
        disparate_impact=di,
        protected_accept_rate=protected.accept_rate,
        reference_accept_rate=reference.accept_rate,
        verdict=UNFAIR if di < DI_THRESHOLD else FAIR,
        protected_counts=protected,
        reference_counts=reference,
    )


def membership_label(app: Application, dataset_or_model, attribute: str) -> str:
    spec = dataset_or_model.spec(attribute)
    return spec.categories[int(app.value(attribute))]


def decisions_for_model(
    model: ScoringModel, apps: Sequence[Application], group: GroupSpec
) -> list[tuple[str, str]]:
    return [
        (membership_label(app, model, group.attribute), predict(model, app).decision)
        for app in apps
    ]


def audit_model(
    model: ScoringModel, dataset: Dataset, group: GroupSpec
) -> FairnessReport:
    """DI of the model's predictions over the dataset's applications."""
    return disparate_impact(decisions_for_model(model, dataset.applications, group), group)


def balanced_accuracy(preds: Sequence[Prediction], truth: Sequence[str]) -> float:
    """(TPR + TNR) / 2 with accepted as the positive class."""
    if not preds or len(preds) != len(truth):
        raise ContractError("predictions and truth must align and be nonempty")
    tp = tn = fp = fn = 0
    for pred, label in zip(preds, truth):
        if label not in (ACCEPTED, REJECTED):
            raise ContractError(f"bad truth label {label!r}")
        if label == ACCEPTED:
            if pred.decision == ACCEPTED:
                tp += 1
            else:
                fn += 1
        else:
            if pred.decision == ACCEPTED:
                fp += 1
            else:
                tn += 1
    if tp + fn == 0 or tn + fp == 0:
        raise ContractError("truth must contain both label classes")
    return (tp / (tp + fn) + tn / (tn + fp)) / 2.0


def unfairness_ratio(judgments: Sequence[FairnessJudgment]) -> float:
    """Unfair judgments over all fair-or-unfair judgments, after resolving
    supersession per (session, application). Needs-human markup counts as
    neither."""
    fair = unfair = 0
    for j in effective_judgments(judgments):
        if j.verdict == FAIR:
            fair += 1
        elif j.verdict == UNFAIR:
            unfair += 1
    if fair + unfair == 0:
        raise UndefinedRatioError("no fair or unfair judgments recorded")
    return unfair / (fair + unfair)


def mean_unfairness_ratio(judgments: Sequence[FairnessJudgment]) -> float:
    """Per-participant ratios averaged across participants (participants
    with no fair/unfair judgments are skipped, not counted as zero)."""
    by_session: dict[str, list[FairnessJudgment]] = {}
    for j in judgments:
        by_session.setdefault(j.session_id, []).append(j)
    ratios = []
    for sid in sorted(by_session):
        try:
            ratios.append(unfairness_ratio(by_session[sid]))
        except UndefinedRatioError:
            continue
    if not ratios:
        raise UndefinedRatioError("no participant made a fair or unfair judgment")
    return sum(ratios) / len(ratios)


@dataclass(frozen=True)
class OverviewCounts:
    accepted: int
    rejected: int
    judged_fair: int
    judged_unfair: int

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "judged_fair": self.judged_fair,
            "judged_unfair": self.judged_unfair,
        }


def fairness_delta(
    adjusted: AdjustedDecisionSet, group: GroupSpec
) -> tuple[FairnessReport, FairnessReport]:
    """DI before (original predictions) and after (adjusted predictions)
    over the decision set's applications."""
    model = adjusted.model
    before = [
        (membership_label(app, model, group.attribute),
         adjusted.original_predictions[app.id].decision)
        for app in adjusted.applications
    ]
    after = [
        (membership_label(app, model, group.attribute),
         adjusted.predictions[app.id].decision)
        for app in adjusted.applications
    ]
    return disparate_impact(before, group), disparate_impact(after, group)


def per_participant_models(
    suggestions: Sequence[WeightSuggestion],
    model: ScoringModel,
    apps: Sequence[Application],
    group: GroupSpec,
) -> dict[str, FairnessReport]:
    """One report per participant who suggested weights: their per-attribute
    mean suggestion becomes a global weight override, and DI is computed on
    every application under that vector. Sessions with no suggestions are
    skipped."""
    by_session: dict[str, list[WeightSuggestion]] = {}
    for s in effective_suggestions(list(suggestions)):
        by_session.setdefault(s.session_id, []).append(s)
    out: dict[str, FairnessReport] = {}
    for sid in sorted(by_session):
        weights = session_mean_weights(by_session[sid], model)
        decisions = [
            (
                membership_label(app, model, group.attribute),
                predict_with_weights(model, app, weights).decision,
            )
            for app in apps
        ]
        out[sid] = disparate_impact(decisions, group)
    return out


def overview_counts(
    preds: Sequence[Prediction], judgments: Sequence[FairnessJudgment]
) -> OverviewCounts:
    """The four counters of the system-overview panel. Judged counts follow
    the latest markup per application; re-marking replaces."""
    accepted = sum(1 for p in preds if p.decision == ACCEPTED)
    fair = unfair = 0
    for j in effective_judgments(judgments):
        if j.verdict == FAIR:
            fair += 1
        elif j.verdict == UNFAIR:
            unfair += 1
    return OverviewCounts(
        accepted=accepted,
        rejected=len(preds) - accepted,
        judged_fair=fair,
        judged_unfair=unfair,
    )
