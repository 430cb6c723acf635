"""End-user feedback: fairness judgments, weight suggestions, and the
append-only event log they live in.

Re-marking an application or re-suggesting weights supersedes the earlier
entry for the same (session, application) pair, so every edit stays
reversible. Aggregation averages the suggested value per attribute per
application and keeps original weights wherever nobody suggested a change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .dataset import Application
from .errors import ContractError, CorruptLogError, ValidationError
from .model import Prediction, ScoringModel, predict, predict_with_weights

VERDICT_FAIR = "fair"
VERDICT_UNFAIR = "unfair"
VERDICT_CLEARED = "cleared"
VERDICTS = (VERDICT_FAIR, VERDICT_UNFAIR, VERDICT_CLEARED)

# Suggested weights may move anywhere within +/- SLIDER_SPAN times the
# model's largest absolute weight: wide enough to flip any sign, bounded
# enough to keep utilities finite.
SLIDER_SPAN = 2.0


@dataclass(frozen=True)
class FairnessJudgment:
    session_id: str
    application_id: str
    verdict: str
    needs_human: bool = False
    timestamp: float = 0.0

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ContractError(f"bad verdict {self.verdict!r}")


@dataclass(frozen=True)
class WeightSuggestion:
    session_id: str
    application_id: str
    weights: Mapping[str, float]
    timestamp: float = 0.0


def effective_judgments(
    judgments: Sequence[FairnessJudgment],
) -> list[FairnessJudgment]:
    """Latest verdict per (session, application); ties on timestamp resolve
    to the later list position. Cleared entries erase the verdict but are
    kept so needs-human markup survives."""
    latest: dict[tuple[str, str], FairnessJudgment] = {}
    for j in judgments:
        key = (j.session_id, j.application_id)
        prev = latest.get(key)
        if prev is None or j.timestamp >= prev.timestamp:
            latest[key] = j
    return [latest[k] for k in sorted(latest)]


def effective_suggestions(
    suggestions: Sequence[WeightSuggestion],
) -> list[WeightSuggestion]:
    """Latest suggestion per (session, application)."""
    latest: dict[tuple[str, str], WeightSuggestion] = {}
    for s in suggestions:
        key = (s.session_id, s.application_id)
        prev = latest.get(key)
        if prev is None or s.timestamp >= prev.timestamp:
            latest[key] = s
    return [latest[k] for k in sorted(latest)]


def slider_bounds(model: ScoringModel) -> tuple[float, float]:
    span = SLIDER_SPAN * model.max_abs_weight()
    return (-span, span)


def validate_suggestion(model: ScoringModel, suggestion: WeightSuggestion) -> None:
    """Raises ValidationError naming the first offending attribute."""
    lo, hi = slider_bounds(model)
    for name in suggestion.weights:
        if name not in model.weights:
            raise ValidationError(
                f"model has no attribute named {name!r}", field=name
            )
    for name, value in suggestion.weights.items():
        if not lo <= float(value) <= hi:
            raise ValidationError(
                f"suggested weight {value} for {name!r} is outside "
                f"[{lo:.6g}, {hi:.6g}]",
                field=name,
            )


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdjustedDecisionSet:
    """Per-application effective weight vectors and recomputed decisions.

    This is a decision set, not a single coherent model: each application
    carries its own vector, mirroring the offline aggregation procedure.
    Applications nobody touched keep the original model's weights and their
    original prediction object verbatim.
    """

    model: ScoringModel
    applications: tuple[Application, ...]
    effective_weights: Mapping[str, Mapping[str, float]]
    predictions: Mapping[str, Prediction]
    original_predictions: Mapping[str, Prediction]
    overridden: frozenset[str]


def aggregate(
    suggestions: Iterable[WeightSuggestion],
    model: ScoringModel,
    apps: Sequence[Application],
) -> AdjustedDecisionSet:
    """Average the suggested value per (application, attribute) over the
    effective suggestions, keep originals elsewhere, and recompute each
    application's confidence with its effective vector and the original
    intercept."""
    by_app: dict[str, dict[str, list[float]]] = {}
    for s in effective_suggestions(list(suggestions)):
        per_attr = by_app.setdefault(s.application_id, {})
        for name, value in s.weights.items():
            if name not in model.weights:
                raise ContractError(f"suggestion names unknown attribute {name!r}")
            per_attr.setdefault(name, []).append(float(value))

    effective: dict[str, dict[str, float]] = {}
    predictions: dict[str, Prediction] = {}
    original: dict[str, Prediction] = {}
    overridden: set[str] = set()
    for app in apps:
        orig_pred = predict(model, app)
        original[app.id] = orig_pred
        if app.id in by_app and by_app[app.id]:
            weights = dict(model.weights)
            for name, values in by_app[app.id].items():
                weights[name] = sum(values) / len(values)
            effective[app.id] = weights
            predictions[app.id] = predict_with_weights(model, app, weights)
            overridden.add(app.id)
        else:
            effective[app.id] = dict(model.weights)
            predictions[app.id] = orig_pred
    return AdjustedDecisionSet(
        model=model,
        applications=tuple(apps),
        effective_weights=effective,
        predictions=predictions,
        original_predictions=original,
        overridden=frozenset(overridden),
    )


def session_mean_weights(
    session_suggestions: Sequence[WeightSuggestion], model: ScoringModel
) -> dict[str, float]:
    """One participant's mean suggested value per attribute across the
    applications they edited; attributes never suggested keep originals."""
    per_attr: dict[str, list[float]] = {}
    for s in effective_suggestions(list(session_suggestions)):
        for name, value in s.weights.items():
            per_attr.setdefault(name, []).append(float(value))
    weights = dict(model.weights)
    for name, values in per_attr.items():
        if name not in model.weights:
            raise ContractError(f"suggestion names unknown attribute {name!r}")
        weights[name] = sum(values) / len(values)
    return weights


# ---------------------------------------------------------------------------
# newline-delimited JSON event log
# ---------------------------------------------------------------------------

EVENT_FIELDS = ("type", "session_id", "application_id", "payload", "timestamp")


def format_event(
    type: str,
    session_id: str,
    application_id: str | None,
    payload: Mapping[str, Any],
    timestamp: float,
) -> dict[str, Any]:
    return {
        "type": type,
        "session_id": session_id,
        "application_id": application_id,
        "payload": dict(payload),
        "timestamp": timestamp,
    }


def event_line(event: Mapping[str, Any]) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


class EventLog:
    """Append-only NDJSON record of everything users did.

    Replay is a pure fold: parsing the same file twice yields the same
    event list, and a corrupt line halts replay with its line number while
    preserving the events parsed before it.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, event: Mapping[str, Any]) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(event_line(event) + "\n")
            fh.flush()

    def exists(self) -> bool:
        return self.path.exists()

    def replay(self) -> list[dict[str, Any]]:
        if not self.path.exists():
            return []
        events: list[dict[str, Any]] = []
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    event = json.loads(stripped)
                except json.JSONDecodeError as exc:
                    raise CorruptLogError(
                        f"{self.path}:{line_no}: unparseable event line ({exc.msg})",
                        line_number=line_no,
                        events=events,
                    ) from None
                if not isinstance(event, dict) or "type" not in event:
                    raise CorruptLogError(
                        f"{self.path}:{line_no}: event line is not an object with a type",
                        line_number=line_no,
                        events=events,
                    )
                events.append(event)
        return events


def judgment_from_event(event: Mapping[str, Any]) -> FairnessJudgment:
    p = event.get("payload", {})
    return FairnessJudgment(
        session_id=event["session_id"],
        application_id=event["application_id"],
        verdict=p.get("verdict", VERDICT_CLEARED),
        needs_human=bool(p.get("needs_human", False)),
        timestamp=float(event.get("timestamp", 0.0)),
    )


def suggestion_from_event(event: Mapping[str, Any]) -> WeightSuggestion:
    p = event.get("payload", {})
    return WeightSuggestion(
        session_id=event["session_id"],
        application_id=event["application_id"],
        weights={k: float(v) for k, v in p.get("weights", {}).items()},
        timestamp=float(event.get("timestamp", 0.0)),
    )


def judgment_event(j: FairnessJudgment) -> dict[str, Any]:
    return format_event(
        "judgment",
        j.session_id,
        j.application_id,
        {"verdict": j.verdict, "needs_human": j.needs_human},
        j.timestamp,
    )


def suggestion_event(s: WeightSuggestion) -> dict[str, Any]:
    return format_event(
        "suggestion",
        s.session_id,
        s.application_id,
        {"weights": dict(s.weights)},
        s.timestamp,
    )
