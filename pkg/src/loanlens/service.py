"""HTTP API for the debugging workbench UI.

Every mutating endpoint appends one event to a newline-delimited JSON log
before acknowledging, so restarting the service and replaying the log
restores all session state exactly. Responses are pure functions of
(model, dataset, event log, query); the trained model itself is never
mutated — fairness deltas are derived views.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fastapi import Depends, FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import culture
from .dataset import Dataset
from .errors import (
    ContractError,
    LoanLensError,
    NotFoundError,
    UndefinedRatioError,
    ValidationError,
)
from .fairness import (
    fairness_delta,
    group_spec_for,
    membership_label,
    overview_counts,
)
from .feedback import (
    EventLog,
    FairnessJudgment,
    WeightSuggestion,
    aggregate,
    format_event,
    slider_bounds,
    validate_suggestion,
)
from .model import (
    ScoringModel,
    attribute_similarities,
    criticality,
    model_similarity,
    predict,
    predict_all,
    similar_applications,
    value_distributions,
)

EVENT_KINDS = (
    "filter",
    "sort",
    "select_application",
    "compare",
    "judgment",
    "suggestion",
    "rating",
)

TASKLOAD_ASPECTS = ("mental", "physical", "temporal", "performance", "effort", "frustration")

DEFAULT_PAGE_SIZE = 50
MAX_PAGE_SIZE = 300

ALGORITHM_EXPLANATION = (
    "Every application receives a score: each attribute's value is scaled "
    "to a common 0-to-1 range, multiplied by that attribute's weight, and "
    "the results are added together with a constant starting value. The "
    "score is converted into a confidence between 0% and 100% — the higher "
    "the score, the closer to 100%. When the confidence is above 50% the "
    "application is accepted, otherwise it is rejected. Positive weights "
    "push toward acceptance, negative weights push toward rejection, and "
    "larger absolute weights matter more."
)


class UnknownSessionError(LoanLensError):
    code = "unknown_session"


@dataclass
class SessionRecord:
    session_id: str
    country: str
    created_at: float
    pre_rating: int | None = None
    post_rating: int | None = None
    taskload: dict[str, int] | None = None


@dataclass
class ServiceState:
    """Mutable session state, rebuilt from the event log by a pure fold."""

    sessions: dict[str, SessionRecord] = field(default_factory=dict)
    judgments: list[FairnessJudgment] = field(default_factory=list)
    suggestions: list[WeightSuggestion] = field(default_factory=list)
    interactions: list[dict[str, Any]] = field(default_factory=list)
    last_timestamp: dict[str, float] = field(default_factory=dict)

    def session_judgments(self, session_id: str) -> list[FairnessJudgment]:
        return [j for j in self.judgments if j.session_id == session_id]

    def snapshot(self) -> dict[str, Any]:
        return {
            "sessions": {
                sid: (s.country, s.created_at, s.pre_rating, s.post_rating, s.taskload)
                for sid, s in self.sessions.items()
            },
            "judgments": list(self.judgments),
            "suggestions": list(self.suggestions),
            "interactions": [tuple(sorted(e.items())) for e in self.interactions],
        }


def apply_event(state: ServiceState, event: Mapping[str, Any]) -> None:
    kind = event["type"]
    sid = event.get("session_id", "")
    ts = float(event.get("timestamp", 0.0))
    payload = event.get("payload", {})
    if kind == "session":
        state.sessions[sid] = SessionRecord(
            session_id=sid,
            country=payload.get("country", ""),
            created_at=ts,
            pre_rating=payload.get("pre_rating"),
        )
    elif kind == "judgment":
        state.judgments.append(
            FairnessJudgment(
                session_id=sid,
                application_id=event.get("application_id", ""),
                verdict=payload.get("verdict", "cleared"),
                needs_human=bool(payload.get("needs_human", False)),
                timestamp=ts,
            )
        )
    elif kind == "suggestion":
        state.suggestions.append(
            WeightSuggestion(
                session_id=sid,
                application_id=event.get("application_id", ""),
                weights={k: float(v) for k, v in payload.get("weights", {}).items()},
                timestamp=ts,
            )
        )
    elif kind == "interaction":
        state.interactions.append(dict(event))
    elif kind == "post_rating":
        if sid in state.sessions:
            state.sessions[sid].post_rating = payload.get("rating")
    elif kind == "taskload":
        if sid in state.sessions:
            state.sessions[sid].taskload = {
                a: int(payload[a]) for a in TASKLOAD_ASPECTS if a in payload
            }
    else:
        raise ContractError(f"unknown event type {kind!r}")
    state.last_timestamp[sid] = max(state.last_timestamp.get(sid, 0.0), ts)


def replay_state(log: EventLog) -> ServiceState:
    """Pure fold over the log: replaying twice yields identical state."""
    state = ServiceState()
    for event in log.replay():
        apply_event(state, event)
    return state


# ---------------------------------------------------------------------------
# filtering and sorting
# ---------------------------------------------------------------------------

_OPS = ("<=", ">=", "!=", "=", "<", ">")


@dataclass(frozen=True)
class FilterPredicate:
    attribute: str
    op: str
    value: str
    range_: tuple[float, float] | None = None


def parse_filter(expression: str, model: ScoringModel) -> list[FilterPredicate]:
    """Comma-separated conjunction of ``name<op>value`` predicates; ranges
    are written ``name=lo..hi``."""
    predicates = []
    for term in expression.split(","):
        term = term.strip()
        if not term:
            continue
        for op in _OPS:
            pos = term.find(op)
            if pos > 0:
                name, raw = term[:pos].strip(), term[pos + len(op):].strip()
                break
        else:
            raise ValidationError(f"cannot parse filter term {term!r}", field="filter")
        spec = None
        for a in model.attributes:
            if a.name == name:
                spec = a
                break
        if spec is None:
            raise ValidationError(f"unknown filter attribute {name!r}", field="filter")
        if op == "=" and ".." in raw:
            lo_s, hi_s = raw.split("..", 1)
            try:
                rng = (float(lo_s), float(hi_s))
            except ValueError:
                raise ValidationError(
                    f"bad range in filter term {term!r}", field="filter"
                ) from None
            predicates.append(FilterPredicate(name, "range", raw, rng))
            continue
        if spec.is_categorical:
            if op not in ("=", "!="):
                raise ValidationError(
                    f"categorical attribute {name!r} supports only = and !=",
                    field="filter",
                )
            if raw not in spec.categories:
                raise ValidationError(
                    f"{raw!r} is not a category of {name!r}", field="filter"
                )
        else:
            try:
                float(raw)
            except ValueError:
                raise ValidationError(
                    f"non-numeric comparison value in {term!r}", field="filter"
                ) from None
        predicates.append(FilterPredicate(name, op, raw))
    return predicates


def predicate_matches(pred: FilterPredicate, app, model: ScoringModel) -> bool:
    spec = model.spec(pred.attribute)
    value = app.value(pred.attribute)
    if pred.range_ is not None:
        lo, hi = pred.range_
        return lo <= float(value) <= hi
    if spec.is_categorical:
        label = spec.categories[int(value)]
        return (label == pred.value) if pred.op == "=" else (label != pred.value)
    x, y = float(value), float(pred.value)
    return {
        "=": x == y,
        "!=": x != y,
        "<": x < y,
        "<=": x <= y,
        ">": x > y,
        ">=": x >= y,
    }[pred.op]


SORT_KEYS = ("id", "decision", "confidence", "judgment")
_JUDGMENT_ORDER = {"fair": 0, "unfair": 1, None: 2}


def sort_key(sort: str, item: Mapping[str, Any]):
    if sort == "id":
        return (item["id"],)
    if sort == "decision":
        return (item["decision"], item["id"])
    if sort == "confidence":
        return (item["confidence"], item["id"])
    if sort == "judgment":
        return (_JUDGMENT_ORDER.get(item["judgment"], 2), item["id"])
    raise ValidationError(f"unknown sort key {sort!r}", field="sort")


# ---------------------------------------------------------------------------
# app factory
# ---------------------------------------------------------------------------

class SessionBody(BaseModel):
    country: str = ""
    pre_rating: int | None = None
    registered_residence: str | None = None
    registered_birth: str | None = None
    questionnaire_residence: str | None = None
    questionnaire_nationality: str | None = None


class JudgmentBody(BaseModel):
    verdict: str
    needs_human: bool = False


class WeightsBody(BaseModel):
    weights: dict[str, float]


class InteractionBody(BaseModel):
    kind: str
    payload: dict[str, Any] = {}


class RatingBody(BaseModel):
    rating: int


class TaskloadBody(BaseModel):
    mental: int
    physical: int
    temporal: int
    performance: int
    effort: int
    frustration: int


def _error_response(exc: LoanLensError) -> JSONResponse:
    status = {
        "unknown_session": 401,
        "not_found": 404,
        "validation_error": 422,
        "contract_error": 422,
        "undefined_ratio": 422,
    }.get(exc.code, 422)
    body: dict[str, Any] = {"error": {"code": exc.code, "message": str(exc)}}
    if isinstance(exc, ValidationError) and exc.field:
        body["error"]["field"] = exc.field
    return JSONResponse(status_code=status, content=body)


def create_app(
    model: ScoringModel,
    dataset: Dataset,
    log_dir: str | Path,
) -> FastAPI:
    """Service over a trained model and the applications to present.

    Replays ``log_dir/events.ndjson`` on startup when present.
    """
    log_path = Path(log_dir) / "events.ndjson"
    Path(log_dir).mkdir(parents=True, exist_ok=True)
    log = EventLog(log_path)
    state = replay_state(log)
    lock = threading.RLock()

    apps = list(dataset.applications)
    apps_by_id = {a.id: a for a in apps}
    predictions = predict_all(model, apps)
    preds_by_id = {p.application_id: p for p in predictions}
    distributions = {
        d.attribute: d for d in value_distributions(model, apps, predictions)
    }
    bounds = slider_bounds(model)

    app = FastAPI(title="loanlens service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    # exposed for tests and embedding
    app.state.model = model
    app.state.dataset = dataset
    app.state.store = state
    app.state.event_log = log

    @app.exception_handler(LoanLensError)
    async def _handle_domain_error(request: Request, exc: LoanLensError):
        return _error_response(exc)

    def session_from_token(
        x_session_token: str | None = Header(default=None),
    ) -> SessionRecord:
        if not x_session_token or x_session_token not in state.sessions:
            raise UnknownSessionError("missing or unknown session token")
        return state.sessions[x_session_token]

    def optional_session(
        x_session_token: str | None = Header(default=None),
    ) -> SessionRecord | None:
        if not x_session_token:
            return None
        if x_session_token not in state.sessions:
            raise UnknownSessionError("unknown session token")
        return state.sessions[x_session_token]

    def need_app(app_id: str):
        if app_id not in apps_by_id:
            raise NotFoundError(f"no application with id {app_id!r}")
        return apps_by_id[app_id]

    def record(event: dict[str, Any]) -> None:
        """Append to disk first, then fold into memory, then acknowledge."""
        log.append(event)
        apply_event(state, event)

    def stamp(session_id: str) -> float:
        now = time.time()
        return max(now, state.last_timestamp.get(session_id, 0.0))

    def markup_for(session: SessionRecord | None) -> dict[str, dict[str, Any]]:
        if session is None:
            return {}
        out: dict[str, dict[str, Any]] = {}
        from .feedback import effective_judgments

        for j in effective_judgments(state.session_judgments(session.session_id)):
            verdict = j.verdict if j.verdict in ("fair", "unfair") else None
            out[j.application_id] = {"judgment": verdict, "needs_human": j.needs_human}
        return out

    # -- sessions ----------------------------------------------------------

    @app.post("/sessions")
    def create_session(body: SessionBody):
        if body.pre_rating is not None and not 1 <= body.pre_rating <= 7:
            raise ValidationError("pre_rating must be in 1..7", field="pre_rating")
        try:
            country = body.country or culture.resolve_country(
                body.registered_residence,
                body.registered_birth,
                body.questionnaire_residence,
                body.questionnaire_nationality,
            )
        except LoanLensError:
            country = ""
        with lock:
            sid = uuid.uuid4().hex
            event = format_event(
                "session",
                sid,
                None,
                {"country": country, "pre_rating": body.pre_rating},
                stamp(sid),
            )
            record(event)
        return {"session_id": sid, "country": country}

    @app.post("/sessions/{session_id}/events")
    def append_interaction(session_id: str, body: InteractionBody):
        if body.kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {body.kind!r}", field="kind")
        with lock:
            if session_id not in state.sessions:
                raise UnknownSessionError("unknown session token")
            event = format_event(
                "interaction",
                session_id,
                body.payload.get("application_id"),
                {"kind": body.kind, **body.payload},
                stamp(session_id),
            )
            record(event)
        return {"ok": True}

    @app.post("/sessions/{session_id}/post_rating")
    def post_rating(session_id: str, body: RatingBody):
        if not 1 <= body.rating <= 7:
            raise ValidationError("rating must be in 1..7", field="rating")
        with lock:
            if session_id not in state.sessions:
                raise UnknownSessionError("unknown session token")
            record(
                format_event(
                    "post_rating",
                    session_id,
                    None,
                    {"rating": body.rating},
                    stamp(session_id),
                )
            )
        return {"ok": True}

    @app.post("/sessions/{session_id}/taskload")
    def post_taskload(session_id: str, body: TaskloadBody):
        values = body.model_dump()
        for aspect, value in values.items():
            if not 0 <= value <= 100:
                raise ValidationError(
                    f"taskload {aspect} must be in 0..100", field=aspect
                )
        with lock:
            if session_id not in state.sessions:
                raise UnknownSessionError("unknown session token")
            record(
                format_event(
                    "taskload", session_id, None, values, stamp(session_id)
                )
            )
        return {"ok": True}

    # -- read endpoints ------------------------------------------------------

    @app.get("/overview")
    def overview(session: SessionRecord = Depends(session_from_token)):
        with lock:
            counts = overview_counts(
                predictions, state.session_judgments(session.session_id)
            )
        return counts.to_dict()

    @app.get("/model")
    def model_panel():
        importance = model.importance()
        attributes = []
        for spec in model.attributes:
            dist = distributions[spec.name]
            attributes.append(
                {
                    "name": spec.name,
                    "kind": spec.kind,
                    "categories": list(spec.categories),
                    "provenance": spec.provenance,
                    "sensitive": spec.sensitive,
                    "weight": model.weights[spec.name],
                    "importance": importance[spec.name],
                    "distribution": {
                        "constant": dist.constant,
                        "bins": [
                            {
                                "lo": b.lo,
                                "hi": b.hi,
                                "accepted_pct": b.accepted_pct,
                                "rejected_pct": b.rejected_pct,
                            }
                            for b in dist.bins
                        ],
                    },
                }
            )
        return {
            "algorithm": ALGORITHM_EXPLANATION,
            "intercept": model.intercept,
            "attributes": attributes,
        }

    @app.get("/applications")
    def list_applications(
        sort: str = "id",
        order: str = "asc",
        filter: str = "",
        page: int = 1,
        page_size: int = DEFAULT_PAGE_SIZE,
        session: SessionRecord | None = Depends(optional_session),
    ):
        if sort not in SORT_KEYS:
            raise ValidationError(f"unknown sort key {sort!r}", field="sort")
        if order not in ("asc", "desc"):
            raise ValidationError("order must be asc or desc", field="order")
        if page < 1:
            raise ValidationError("page must be >= 1", field="page")
        if not 1 <= page_size <= MAX_PAGE_SIZE:
            raise ValidationError(
                f"page_size must be in 1..{MAX_PAGE_SIZE}", field="page_size"
            )
        predicates = parse_filter(filter, model) if filter else []
        with lock:
            markup = markup_for(session)
        items = []
        for a in apps:
            if all(predicate_matches(p, a, model) for p in predicates):
                pred = preds_by_id[a.id]
                m = markup.get(a.id, {})
                items.append(
                    {
                        "id": a.id,
                        "decision": pred.decision,
                        "confidence": pred.confidence,
                        "judgment": m.get("judgment"),
                        "needs_human": m.get("needs_human", False),
                    }
                )
        items.sort(key=lambda item: sort_key(sort, item), reverse=(order == "desc"))
        total = len(items)
        start = (page - 1) * page_size
        return {
            "items": items[start : start + page_size],
            "total": total,
            "page": page,
            "page_size": page_size,
        }

    @app.get("/applications/{app_id}")
    def application_detail(
        app_id: str, session: SessionRecord | None = Depends(optional_session)
    ):
        a = need_app(app_id)
        pred = preds_by_id[app_id]
        crit = criticality(model, a)
        with lock:
            markup = markup_for(session).get(app_id, {})
        attributes = []
        for spec in model.attributes:
            value = a.value(spec.name)
            attributes.append(
                {
                    "name": spec.name,
                    "kind": spec.kind,
                    "value": spec.display_value(value),
                    "encoded": model.encode_value(spec, value),
                    "weight": model.weights[spec.name],
                    "criticality": crit.entries[spec.name],
                    "provenance": spec.provenance,
                    "sensitive": spec.sensitive,
                }
            )
        return {
            "id": a.id,
            "decision": pred.decision,
            "confidence": pred.confidence,
            "utility": crit.utility,
            "intercept": model.intercept,
            "judgment": markup.get("judgment"),
            "needs_human": markup.get("needs_human", False),
            "slider_bounds": [bounds[0], bounds[1]],
            "attributes": attributes,
        }

    @app.get("/applications/{app_id}/similar")
    def similar(app_id: str, lo: float = 0.0, hi: float = 1.0):
        a = need_app(app_id)
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValidationError(
                "similarity range must satisfy 0 <= lo <= hi <= 1", field="lo"
            )
        annotated = similar_applications(model, a, apps, (lo, hi))
        return {
            "target": app_id,
            "lo": lo,
            "hi": hi,
            "items": [
                {
                    "id": s.application_id,
                    "similarity": s.similarity,
                    "confidence": s.confidence,
                    "decision": s.decision,
                    "selectable": s.selectable,
                }
                for s in annotated
                if s.application_id != app_id
            ],
        }

    @app.get("/applications/{app_id}/similar/{other_id}")
    def compare(app_id: str, other_id: str):
        a, b = need_app(app_id), need_app(other_id)
        sims = attribute_similarities(a, b, model.attributes, model.scaling)
        return {
            "a": app_id,
            "b": other_id,
            "similarity": model_similarity(model, a, b),
            "attributes": [
                {
                    "name": spec.name,
                    "a_value": spec.display_value(a.value(spec.name)),
                    "b_value": spec.display_value(b.value(spec.name)),
                    "similarity": sims[spec.name],
                }
                for spec in model.attributes
            ],
        }

    # -- feedback ----------------------------------------------------------

    @app.post("/applications/{app_id}/judgment")
    def post_judgment(
        app_id: str,
        body: JudgmentBody,
        session: SessionRecord = Depends(session_from_token),
    ):
        need_app(app_id)
        if body.verdict not in ("fair", "unfair", "cleared"):
            raise ValidationError(f"bad verdict {body.verdict!r}", field="verdict")
        with lock:
            event = format_event(
                "judgment",
                session.session_id,
                app_id,
                {"verdict": body.verdict, "needs_human": body.needs_human},
                stamp(session.session_id),
            )
            record(event)
            counts = overview_counts(
                predictions, state.session_judgments(session.session_id)
            )
        return {"ok": True, "overview": counts.to_dict()}

    @app.post("/applications/{app_id}/weights")
    def post_weights(
        app_id: str,
        body: WeightsBody,
        session: SessionRecord = Depends(session_from_token),
    ):
        need_app(app_id)
        suggestion = WeightSuggestion(
            session_id=session.session_id,
            application_id=app_id,
            weights=body.weights,
            timestamp=0.0,
        )
        validate_suggestion(model, suggestion)
        with lock:
            event = format_event(
                "suggestion",
                session.session_id,
                app_id,
                {"weights": dict(body.weights)},
                stamp(session.session_id),
            )
            record(event)
        return {"ok": True}

    # -- reports -----------------------------------------------------------

    @app.get("/reports/fairness")
    def fairness_report(group_attribute: str, protected: str = ""):
        spec = None
        for candidate in model.attributes:
            if candidate.name == group_attribute:
                spec = candidate
                break
        if spec is None:
            raise NotFoundError(f"no attribute named {group_attribute!r}")
        if not spec.is_categorical:
            raise ValidationError(
                f"group attribute {group_attribute!r} must be categorical",
                field="group_attribute",
            )
        if not protected:
            protected = _lowest_accept_rate_category(spec)
        group = group_spec_for(model, group_attribute, protected)
        with lock:
            suggestions = list(state.suggestions)
        adjusted = aggregate(suggestions, model, apps)
        before, after = fairness_delta(adjusted, group)
        return {
            "group_attribute": group_attribute,
            "protected": protected,
            "before": before.to_dict(),
            "after": after.to_dict(),
            "overridden_applications": sorted(adjusted.overridden),
            "suggestion_count": len(suggestions),
        }

    def _lowest_accept_rate_category(spec) -> str:
        rates = []
        for label in spec.categories:
            members = [
                preds_by_id[a.id].decision
                for a in apps
                if membership_label(a, model, spec.name) == label
            ]
            if not members:
                continue
            accept = sum(1 for d in members if d == "accepted") / len(members)
            rates.append((accept, label))
        if not rates:
            raise UndefinedRatioError(
                f"no applications carry attribute {spec.name!r}"
            )
        rates.sort(key=lambda pair: (pair[0], spec.categories.index(pair[1])))
        return rates[0][1]

    return app


def serve(
    model: ScoringModel,
    dataset: Dataset,
    log_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    import uvicorn

    uvicorn.run(create_app(model, dataset, log_dir), host=host, port=port)
