"""The interpretable scoring model: one weight per attribute.

Training minimizes the L2-regularized mean negative log-likelihood of a
logistic model over encoded attribute values. Encoding gives every
attribute a comparable [0, 1] scale so weight magnitudes are comparable
across attributes: continuous values are min-max scaled with training-set
bounds (test values clamped), categorical values map their ordinal index
to [0, 1], which makes binary categories exactly {0, 1}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .dataset import ACCEPTED, REJECTED, Application, AttributeSpec, Dataset, schema_hash
from .errors import ContractError, ConvergenceError, DegenerateDataError

MODEL_FORMAT = "loanlens-model"
MODEL_VERSION = 1

GRADIENT_TOLERANCE = 1e-6
MAX_ITERATIONS = 500
LBFGS_HISTORY = 10


@dataclass(frozen=True)
class TrainingInfo:
    l2_strength: float
    seed: int
    n_rows: int
    n_iterations: int
    gradient_norm: float
    loss_trace: tuple[float, ...]
    dataset_hash: str = ""
    split: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScoringModel:
    """Immutable trained model: weights, intercept, and encoding metadata."""

    weights: Mapping[str, float]
    intercept: float
    attribute_order: tuple[str, ...]
    scaling: Mapping[str, tuple[float, float]]
    attributes: tuple[AttributeSpec, ...]
    training: TrainingInfo | None = None

    def __post_init__(self):
        if set(self.weights.keys()) != set(self.attribute_order):
            raise ContractError("weights must cover exactly the model's attributes")
        if tuple(a.name for a in self.attributes) != self.attribute_order:
            raise ContractError("attribute metadata must follow attribute_order")

    def spec(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise ContractError(f"model has no attribute named {name!r}")

    def encode_value(self, spec: AttributeSpec, value: float) -> float:
        if spec.is_categorical:
            k = len(spec.categories)
            return float(value) / (k - 1)
        lo, hi = self.scaling[spec.name]
        if hi == lo:
            return 0.0
        return min(1.0, max(0.0, (float(value) - lo) / (hi - lo)))

    def encode(self, app: Application) -> np.ndarray:
        x = np.empty(len(self.attribute_order))
        for i, spec in enumerate(self.attributes):
            x[i] = self.encode_value(spec, app.value(spec.name))
        return x

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[name] for name in self.attribute_order])

    def max_abs_weight(self) -> float:
        return max(abs(w) for w in self.weights.values())

    def importance(self) -> dict[str, float]:
        """|w| normalized by the largest |w|, for circle-sized displays."""
        top = self.max_abs_weight()
        if top == 0.0:
            return {name: 0.0 for name in self.attribute_order}
        return {name: abs(w) / top for name, w in self.weights.items()}


@dataclass(frozen=True)
class Prediction:
    application_id: str
    confidence: float
    decision: str

    def __post_init__(self):
        if (self.decision == ACCEPTED) != (self.confidence > 0.5):
            raise ContractError("decision must be accepted iff confidence > 0.5")


@dataclass(frozen=True)
class CriticalityVector:
    """Per-attribute signed contribution w_k * x_k for one application."""

    application_id: str
    entries: Mapping[str, float]
    intercept: float

    @property
    def utility(self) -> float:
        return math.fsum(self.entries.values()) + self.intercept

    def sorted_by_weight(self, weights: Mapping[str, float]) -> list[str]:
        return sorted(self.entries, key=lambda name: weights[name], reverse=True)


@dataclass(frozen=True)
class DistributionBin:
    lo: float
    hi: float
    accepted_pct: float
    rejected_pct: float


@dataclass(frozen=True)
class ValueDistribution:
    attribute: str
    bins: tuple[DistributionBin, ...]
    constant: bool = False


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _sigmoid(u):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    eu = math.exp(u)
    return eu / (1.0 + eu)


def loss_and_gradient(
    theta: np.ndarray, X: np.ndarray, y: np.ndarray, l2_strength: float
) -> tuple[float, np.ndarray]:
    """Mean NLL plus (l2/2n)*||w||^2; the intercept is not penalized.

    The 1/n scaling keeps the minimizer identical to the total-likelihood
    form while giving the gradient a size-independent scale for the
    stopping tolerance.
    """
    n = X.shape[0]
    w, b = theta[:-1], theta[-1]
    u = X @ w + b
    # log(1 + e^u) - y*u, computed stably
    nll = np.logaddexp(0.0, u) - y * u
    loss = nll.sum() / n + 0.5 * l2_strength * (w @ w) / n
    p = _sigmoid(u)
    r = p - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r / n + l2_strength * w / n
    grad[-1] = r.sum() / n
    return float(loss), grad


def _encode_training(
    train_set: Dataset,
) -> tuple[np.ndarray, np.ndarray, dict[str, tuple[float, float]]]:
    specs = train_set.attributes
    n = len(train_set.applications)
    scaling: dict[str, tuple[float, float]] = {}
    X = np.empty((n, len(specs)))
    for j, spec in enumerate(specs):
        raw = np.array([app.value(spec.name) for app in train_set.applications])
        if spec.is_categorical:
            X[:, j] = raw / (len(spec.categories) - 1)
        else:
            lo, hi = float(raw.min()), float(raw.max())
            scaling[spec.name] = (lo, hi)
            X[:, j] = 0.0 if hi == lo else np.clip((raw - lo) / (hi - lo), 0.0, 1.0)
    y = np.array(
        [1.0 if app.label == ACCEPTED else 0.0 for app in train_set.applications]
    )
    return X, y, scaling


def train(train_set: Dataset, l2_strength: float = 1.0, seed: int = 0) -> ScoringModel:
    """Fit the scoring model with L-BFGS (history 10, at most 500 iterations,
    gradient-norm stop 1e-6). Deterministic: optimization starts from zero
    weights, so ``seed`` only labels the run in the training record.
    """
    if l2_strength <= 0:
        raise ContractError("l2_strength must be positive")
    labels = {app.label for app in train_set.applications}
    if None in labels:
        raise ContractError("training set contains unlabeled applications")
    if labels != {ACCEPTED, REJECTED}:
        raise DegenerateDataError(
            f"training set has a single label class: {sorted(labels)}"
        )

    X, y, scaling = _encode_training(train_set)
    n_attrs = X.shape[1]
    theta0 = np.zeros(n_attrs + 1)

    trace: list[float] = [loss_and_gradient(theta0, X, y, l2_strength)[0]]

    def record(theta_k):
        trace.append(loss_and_gradient(theta_k, X, y, l2_strength)[0])

    result = minimize(
        loss_and_gradient,
        theta0,
        args=(X, y, l2_strength),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={
            "maxcor": LBFGS_HISTORY,
            "maxiter": MAX_ITERATIONS,
            "gtol": GRADIENT_TOLERANCE / 5.0,
            "ftol": 1e-16,
        },
    )
    theta = result.x
    _, grad = loss_and_gradient(theta, X, y, l2_strength)
    gnorm = float(np.max(np.abs(grad)))
    if gnorm > GRADIENT_TOLERANCE:
        raise ConvergenceError(
            f"L-BFGS stopped after {result.nit} iterations with gradient norm "
            f"{gnorm:.3e} > {GRADIENT_TOLERANCE:.0e}",
            gradient_norm=gnorm,
        )

    names = train_set.attribute_names
    return ScoringModel(
        weights={name: float(theta[i]) for i, name in enumerate(names)},
        intercept=float(theta[-1]),
        attribute_order=names,
        scaling=scaling,
        attributes=train_set.attributes,
        training=TrainingInfo(
            l2_strength=l2_strength,
            seed=seed,
            n_rows=len(train_set.applications),
            n_iterations=int(result.nit),
            gradient_norm=gnorm,
            loss_trace=tuple(trace),
            dataset_hash=train_set.schema_hash(),
            split=dict(train_set.metadata.get("split", {})),
        ),
    )


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def utility_of(model: ScoringModel, app: Application) -> float:
    x = model.encode(app)
    return float(x @ model.weight_vector() + model.intercept)


def predict(model: ScoringModel, app: Application) -> Prediction:
    """Confidence is sigmoid(utility); more than 50% counts as accepted, a
    tie at exactly 50% (utility 0) as rejected."""
    u = utility_of(model, app)
    confidence = sigmoid(u)
    return Prediction(
        application_id=app.id,
        confidence=confidence,
        decision=ACCEPTED if confidence > 0.5 else REJECTED,
    )


def predict_with_weights(
    model: ScoringModel, app: Application, weights: Mapping[str, float]
) -> Prediction:
    """Prediction under an overridden weight vector, original intercept."""
    x = model.encode(app)
    w = np.array([weights[name] for name in model.attribute_order])
    u = float(x @ w + model.intercept)
    confidence = sigmoid(u)
    return Prediction(
        application_id=app.id,
        confidence=confidence,
        decision=ACCEPTED if confidence > 0.5 else REJECTED,
    )


def predict_all(model: ScoringModel, apps: Iterable[Application]) -> list[Prediction]:
    return [predict(model, app) for app in apps]


def criticality(model: ScoringModel, app: Application) -> CriticalityVector:
    x = model.encode(app)
    entries = {
        name: float(model.weights[name] * x[i])
        for i, name in enumerate(model.attribute_order)
    }
    return CriticalityVector(
        application_id=app.id, entries=entries, intercept=model.intercept
    )


def value_distributions(
    model: ScoringModel,
    apps: Sequence[Application],
    preds: Sequence[Prediction],
) -> list[ValueDistribution]:
    """Five equal-width bins from each attribute's min to max over ``apps``,
    counting predicted decisions; percentages are of the attribute's total,
    so they sum to 100 across bins. A constant attribute collapses to a
    single flagged bin.
    """
    if not apps:
        raise ContractError("value_distributions needs at least one application")
    if len(apps) != len(preds) or any(
        a.id != p.application_id for a, p in zip(apps, preds)
    ):
        raise ContractError("predictions must align one-to-one with applications")
    accepted = np.array([p.decision == ACCEPTED for p in preds])
    out = []
    for spec in model.attributes:
        raw = np.array([app.value(spec.name) for app in apps])
        lo, hi = float(raw.min()), float(raw.max())
        total = len(apps)
        if lo == hi:
            acc = float(accepted.sum()) / total * 100.0
            out.append(
                ValueDistribution(
                    attribute=spec.name,
                    bins=(DistributionBin(lo, hi, acc, 100.0 - acc),),
                    constant=True,
                )
            )
            continue
        edges = np.linspace(lo, hi, 6)
        idx = np.clip(np.digitize(raw, edges[1:-1], right=False), 0, 4)
        bins = []
        for b in range(5):
            in_bin = idx == b
            n_acc = int((in_bin & accepted).sum())
            n_rej = int((in_bin & ~accepted).sum())
            bins.append(
                DistributionBin(
                    lo=float(edges[b]),
                    hi=float(edges[b + 1]),
                    accepted_pct=n_acc / total * 100.0,
                    rejected_pct=n_rej / total * 100.0,
                )
            )
        out.append(ValueDistribution(attribute=spec.name, bins=tuple(bins)))
    return out


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------

def attribute_similarity(
    spec: AttributeSpec, a_value: float, b_value: float,
    value_range: tuple[float, float] | None,
) -> float:
    """Continuous: 1 - |x - y| / range (values clamped into the range);
    categorical: 1 when equal, else 0."""
    if spec.is_categorical:
        return 1.0 if int(a_value) == int(b_value) else 0.0
    if value_range is None:
        raise ContractError(f"no value range for continuous attribute {spec.name!r}")
    lo, hi = value_range
    if hi == lo:
        return 1.0
    xa = min(1.0, max(0.0, (a_value - lo) / (hi - lo)))
    xb = min(1.0, max(0.0, (b_value - lo) / (hi - lo)))
    return 1.0 - abs(xa - xb)


def attribute_similarities(
    a: Application,
    b: Application,
    specs: Sequence[AttributeSpec],
    ranges: Mapping[str, tuple[float, float]],
) -> dict[str, float]:
    return {
        spec.name: attribute_similarity(
            spec, a.value(spec.name), b.value(spec.name), ranges.get(spec.name)
        )
        for spec in specs
    }


def similarity(
    a: Application,
    b: Application,
    specs: Sequence[AttributeSpec],
    ranges: Mapping[str, tuple[float, float]],
) -> float:
    """Mean of the per-attribute similarities; symmetric, in [0, 1]."""
    sims = attribute_similarities(a, b, specs, ranges)
    return math.fsum(sims.values()) / len(sims)


def model_similarity(model: ScoringModel, a: Application, b: Application) -> float:
    return similarity(a, b, model.attributes, model.scaling)


@dataclass(frozen=True)
class SimilarApplication:
    application_id: str
    similarity: float
    confidence: float
    decision: str
    selectable: bool


def similar_applications(
    model: ScoringModel,
    target: Application,
    pool: Sequence[Application],
    similarity_range: tuple[float, float] = (0.0, 1.0),
) -> list[SimilarApplication]:
    """Annotate every pool application with similarity to the target and its
    prediction; items outside the range are flagged non-selectable rather
    than dropped, so a UI can gray them out."""
    lo, hi = similarity_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ContractError("similarity range must satisfy 0 <= lo <= hi <= 1")
    out = []
    for app in pool:
        sim = model_similarity(model, target, app)
        pred = predict(model, app)
        out.append(
            SimilarApplication(
                application_id=app.id,
                similarity=sim,
                confidence=pred.confidence,
                decision=pred.decision,
                selectable=lo <= sim <= hi,
            )
        )
    return out


# ---------------------------------------------------------------------------
# serialization (lossless: floats stored as hex strings)
# ---------------------------------------------------------------------------

def _enc(x: float) -> dict[str, Any]:
    return {"value": x, "hex": float(x).hex()}


def _dec(d: Mapping[str, Any]) -> float:
    return float.fromhex(d["hex"]) if "hex" in d else float(d["value"])


def model_to_dict(model: ScoringModel) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "intercept": _enc(model.intercept),
        "weights": {name: _enc(model.weights[name]) for name in model.attribute_order},
        "scaling": {
            name: {"min": _enc(lo), "max": _enc(hi)}
            for name, (lo, hi) in model.scaling.items()
        },
        "attributes": [
            {
                "name": a.name,
                "kind": a.kind,
                "categories": list(a.categories),
                "provenance": a.provenance,
                "sensitive": a.sensitive,
            }
            for a in model.attributes
        ],
        "schema_hash": schema_hash(model.attributes),
    }
    if model.training is not None:
        t = model.training
        doc["training"] = {
            "l2_strength": t.l2_strength,
            "seed": t.seed,
            "n_rows": t.n_rows,
            "n_iterations": t.n_iterations,
            "gradient_norm": t.gradient_norm,
            "loss_trace": list(t.loss_trace),
            "dataset_hash": t.dataset_hash,
            "split": dict(t.split),
        }
    return doc


def model_from_dict(doc: Mapping[str, Any]) -> ScoringModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ContractError(f"not a {MODEL_FORMAT} document")
    attributes = tuple(
        AttributeSpec(
            name=a["name"],
            kind=a["kind"],
            categories=tuple(a.get("categories", ())),
            provenance=a.get("provenance", ""),
            sensitive=bool(a.get("sensitive", False)),
        )
        for a in doc["attributes"]
    )
    training = None
    if "training" in doc:
        t = doc["training"]
        training = TrainingInfo(
            l2_strength=t["l2_strength"],
            seed=t["seed"],
            n_rows=t["n_rows"],
            n_iterations=t["n_iterations"],
            gradient_norm=t["gradient_norm"],
            loss_trace=tuple(t["loss_trace"]),
            dataset_hash=t.get("dataset_hash", ""),
            split=dict(t.get("split", {})),
        )
    return ScoringModel(
        weights={name: _dec(w) for name, w in doc["weights"].items()},
        intercept=_dec(doc["intercept"]),
        attribute_order=tuple(a.name for a in attributes),
        scaling={
            name: (_dec(s["min"]), _dec(s["max"]))
            for name, s in doc["scaling"].items()
        },
        attributes=attributes,
        training=training,
    )


def save_model(model: ScoringModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ScoringModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
