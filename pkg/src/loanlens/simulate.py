"""Scripted feedback cohorts: declarative stand-ins for human behavior.

A cohort spec describes segments of synthetic participants. Each member
marks some applications fair/unfair and suggests weight changes for a
target attribute on a fraction of the applications matched by a selector
(for example: rejected applications from foreign applicants). Suggestions
either move the attribute's weight toward zero or amplify it.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .dataset import ACCEPTED, REJECTED, Application
from .errors import ContractError
from .feedback import (
    FairnessJudgment,
    WeightSuggestion,
    format_event,
    judgment_event,
    suggestion_event,
)
from .model import ScoringModel, predict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOWARD_ZERO = "toward_zero"
AMPLIFY = "amplify"


@dataclass(frozen=True)
class Selector:
    """Which applications a member may edit or mark unfair."""

    decision: str | None = None  # original model decision
    attribute: str | None = None
    equals: str | None = None  # category label the attribute must equal

    def matches(self, app: Application, model: ScoringModel, decision: str) -> bool:
        if self.decision is not None and decision != self.decision:
            return False
        if self.attribute is not None:
            spec = model.spec(self.attribute)
            label = spec.categories[int(app.value(self.attribute))]
            if self.equals is not None and label != self.equals:
                return False
        return True


@dataclass(frozen=True)
class SuggestionPolicy:
    target: str
    direction: str  # toward_zero | amplify
    magnitude: float  # fraction toward zero, or amplification factor - 1
    fraction: float  # share of matching applications each member edits
    selector: Selector = field(default_factory=Selector)

    def __post_init__(self):
        if self.direction not in (TOWARD_ZERO, AMPLIFY):
            raise ContractError(f"unknown direction {self.direction!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ContractError("fraction must lie in (0, 1]")
        if self.magnitude < 0.0:
            raise ContractError("magnitude must be nonnegative")

    def suggested_weight(self, original: float) -> float:
        if self.direction == TOWARD_ZERO:
            return original * (1.0 - min(1.0, self.magnitude))
        return original * (1.0 + self.magnitude)


@dataclass(frozen=True)
class SegmentSpec:
    size: int
    countries: tuple[str, ...] = ()
    fair_mean: float = 0.0
    unfair_mean: float = 0.0
    unfair_selector: Selector = field(default_factory=Selector)
    suggestions: SuggestionPolicy | None = None


@dataclass(frozen=True)
class CohortSpec:
    seed: int
    segments: tuple[SegmentSpec, ...]

    @property
    def size(self) -> int:
        return sum(s.size for s in self.segments)


def _selector_from(doc: Mapping[str, Any]) -> Selector:
    return Selector(
        decision=doc.get("decision"),
        attribute=doc.get("attribute"),
        equals=doc.get("equals"),
    )


def cohort_spec_from_dict(doc: Mapping[str, Any]) -> CohortSpec:
    segments = []
    for seg in doc.get("segment", []):
        policy = None
        if "suggestions" in seg:
            s = seg["suggestions"]
            policy = SuggestionPolicy(
                target=s["target"],
                direction=s.get("direction", TOWARD_ZERO),
                magnitude=float(s.get("magnitude", 1.0)),
                fraction=float(s.get("fraction", 1.0)),
                selector=_selector_from(s.get("selector", {})),
            )
        segments.append(
            SegmentSpec(
                size=int(seg["size"]),
                countries=tuple(seg.get("countries", ())),
                fair_mean=float(seg.get("fair_mean", 0.0)),
                unfair_mean=float(seg.get("unfair_mean", 0.0)),
                unfair_selector=_selector_from(seg.get("unfair_selector", {})),
                suggestions=policy,
            )
        )
    if not segments:
        raise ContractError("cohort spec has no [[segment]] blocks")
    return CohortSpec(seed=int(doc.get("seed", 0)), segments=tuple(segments))


def load_cohort_spec(path: str | Path) -> CohortSpec:
    with open(path, "rb") as fh:
        return cohort_spec_from_dict(tomllib.load(fh))


@dataclass(frozen=True)
class CohortRun:
    session_countries: dict[str, str]
    judgments: list[FairnessJudgment]
    suggestions: list[WeightSuggestion]
    events: list[dict[str, Any]]


def run_cohort(
    spec: CohortSpec,
    model: ScoringModel,
    apps: Sequence[Application],
    max_members: int | None = None,
) -> CohortRun:
    """Deterministic synthetic session logs for a cohort. ``max_members``
    truncates the cohort (segments in order) for prefix-growth experiments.
    """
    rng = np.random.default_rng(spec.seed)
    decisions = {app.id: predict(model, app).decision for app in apps}
    session_countries: dict[str, str] = {}
    judgments: list[FairnessJudgment] = []
    suggestions: list[WeightSuggestion] = []
    events: list[dict[str, Any]] = []
    ts = 1_000_000.0
    member_no = 0

    for seg_no, seg in enumerate(spec.segments):
        for _ in range(seg.size):
            if max_members is not None and member_no >= max_members:
                break
            sid = f"sim-{member_no + 1:04d}"
            country = (
                seg.countries[member_no % len(seg.countries)] if seg.countries else ""
            )
            session_countries[sid] = country
            ts += 1.0
            events.append(
                format_event("session", sid, None, {"country": country}, ts)
            )

            # Judgments: unfair marks drawn from the selector's matches,
            # fair marks from the applications this member left unmarked.
            unfair_pool = [
                a.id
                for a in apps
                if seg.unfair_selector.matches(a, model, decisions[a.id])
            ]
            n_unfair = min(int(rng.poisson(seg.unfair_mean)), len(unfair_pool))
            chosen_unfair = (
                [str(x) for x in rng.choice(unfair_pool, size=n_unfair, replace=False)]
                if n_unfair
                else []
            )
            fair_pool = [a.id for a in apps if a.id not in set(chosen_unfair)]
            n_fair = min(int(rng.poisson(seg.fair_mean)), len(fair_pool))
            chosen_fair = (
                [str(x) for x in rng.choice(fair_pool, size=n_fair, replace=False)]
                if n_fair
                else []
            )
            for app_id in chosen_unfair:
                ts += 1.0
                j = FairnessJudgment(sid, app_id, "unfair", timestamp=ts)
                judgments.append(j)
                events.append(judgment_event(j))
            for app_id in chosen_fair:
                ts += 1.0
                j = FairnessJudgment(sid, app_id, "fair", timestamp=ts)
                judgments.append(j)
                events.append(judgment_event(j))

            if seg.suggestions is not None:
                policy = seg.suggestions
                matches = [
                    a.id
                    for a in apps
                    if policy.selector.matches(a, model, decisions[a.id])
                ]
                n_edit = max(1, int(round(policy.fraction * len(matches)))) if matches else 0
                if n_edit:
                    chosen = rng.choice(matches, size=min(n_edit, len(matches)), replace=False)
                    new_weight = policy.suggested_weight(model.weights[policy.target])
                    for app_id in chosen:
                        ts += 1.0
                        s = WeightSuggestion(
                            sid,
                            str(app_id),
                            {policy.target: new_weight},
                            timestamp=ts,
                        )
                        suggestions.append(s)
                        events.append(suggestion_event(s))
            member_no += 1

    return CohortRun(
        session_countries=session_countries,
        judgments=judgments,
        suggestions=suggestions,
        events=events,
    )


def corrective_spec(
    attribute: str,
    protected_label: str,
    size: int,
    seed: int = 0,
    magnitude: float = 1.0,
    fraction: float = 0.3,
    countries: Sequence[str] = (),
) -> CohortSpec:
    """Cohort that weakens the attribute's weight on rejected applications
    from the protected group."""
    return CohortSpec(
        seed=seed,
        segments=(
            SegmentSpec(
                size=size,
                countries=tuple(countries),
                suggestions=SuggestionPolicy(
                    target=attribute,
                    direction=TOWARD_ZERO,
                    magnitude=magnitude,
                    fraction=fraction,
                    selector=Selector(
                        decision=REJECTED, attribute=attribute, equals=protected_label
                    ),
                ),
            ),
        ),
    )


def adversarial_spec(
    attribute: str,
    protected_label: str,
    size: int,
    seed: int = 0,
    magnitude: float = 1.0,
    fraction: float = 0.3,
    countries: Sequence[str] = (),
) -> CohortSpec:
    """Cohort that amplifies the attribute's weight on accepted applications
    from the protected group, pushing them toward rejection."""
    return CohortSpec(
        seed=seed,
        segments=(
            SegmentSpec(
                size=size,
                countries=tuple(countries),
                suggestions=SuggestionPolicy(
                    target=attribute,
                    direction=AMPLIFY,
                    magnitude=magnitude,
                    fraction=fraction,
                    selector=Selector(
                        decision=ACCEPTED, attribute=attribute, equals=protected_label
                    ),
                ),
            ),
        ),
    )
