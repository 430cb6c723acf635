"""Country-level cultural-dimension scores and High/Low grouping.

Scores attach at the group level only: a session's country maps to that
country's six dimension scores, and the session lands in the High or Low
group of each dimension depending on whether the country score exceeds the
mean score of that dimension over the bundled matrix. The matrix and the
neighbor list used to fill missing countries ship as editable CSV data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import Application
from .errors import ContractError, UnresolvedCountryError
from .fairness import FairnessReport, GroupSpec, fairness_delta
from .feedback import WeightSuggestion, aggregate, effective_suggestions
from .model import ScoringModel

DIMENSIONS = ("pd", "idv", "msc", "ua", "lto", "idg")
DIMENSION_LABELS = {
    "pd": "Power Distance",
    "idv": "Individualism",
    "msc": "Masculinity",
    "ua": "Uncertainty Avoidance",
    "lto": "Long Term Orientation",
    "idg": "Indulgence",
}
HIGH = "High"
LOW = "Low"

_ALIASES = {
    "uk": "united kingdom",
    "great britain": "united kingdom",
    "england": "united kingdom",
    "usa": "united states",
    "u.s.a.": "united states",
    "united states of america": "united states",
    "south korea": "korea south",
    "republic of korea": "korea south",
    "czechia": "czech republic",
    "holland": "netherlands",
    "uae": "united arab emirates",
}


def _norm(country: str) -> str:
    key = country.strip().lower()
    return _ALIASES.get(key, key)


@dataclass(frozen=True)
class CultureScores:
    country: str
    pd: float
    idv: float
    msc: float
    ua: float
    lto: float
    idg: float

    def score(self, dimension: str) -> float:
        if dimension not in DIMENSIONS:
            raise ContractError(f"unknown dimension {dimension!r}")
        return float(getattr(self, dimension))


class CultureMatrix:
    """The bundled country-score table plus the neighbor adjacency used to
    resolve countries with missing scores."""

    def __init__(
        self,
        raw: Mapping[str, Mapping[str, float | None]],
        neighbors: Mapping[str, tuple[str, ...]],
    ):
        self._raw = {_norm(c): dict(scores) for c, scores in raw.items()}
        self._neighbors = {_norm(c): tuple(_norm(n) for n in ns) for c, ns in neighbors.items()}
        self._display = {_norm(c): c for c in raw}

    @property
    def countries(self) -> list[str]:
        return sorted(self._display[c] for c in self._raw)

    def raw_scores(self, dimension: str) -> list[float]:
        """Observed (not neighbor-filled) values of one dimension."""
        if dimension not in DIMENSIONS:
            raise ContractError(f"unknown dimension {dimension!r}")
        return [
            float(scores[dimension])
            for _, scores in sorted(self._raw.items())
            if scores.get(dimension) is not None
        ]

    def resolve(self, country: str) -> CultureScores:
        """Scores for a country, filling any missing dimension with the mean
        of its listed neighbors' values for that dimension."""
        key = _norm(country)
        raw = self._raw.get(key, {d: None for d in DIMENSIONS})
        filled: dict[str, float] = {}
        for dim in DIMENSIONS:
            value = raw.get(dim)
            if value is not None:
                filled[dim] = float(value)
                continue
            neighbor_values = [
                self._raw[n][dim]
                for n in self._neighbors.get(key, ())
                if n in self._raw and self._raw[n].get(dim) is not None
            ]
            if not neighbor_values:
                raise UnresolvedCountryError(
                    f"no {DIMENSION_LABELS[dim]} score for {country!r} and no "
                    f"neighbor with one"
                )
            filled[dim] = sum(neighbor_values) / len(neighbor_values)
        return CultureScores(country=self._display.get(key, country), **filled)


def _read_matrix_csv(text: str) -> dict[str, dict[str, float | None]]:
    out: dict[str, dict[str, float | None]] = {}
    for row in csv.DictReader(text.splitlines()):
        scores: dict[str, float | None] = {}
        for dim in DIMENSIONS:
            cell = (row.get(dim) or "").strip()
            scores[dim] = None if cell == "" else float(cell)
        out[row["country"].strip()] = scores
    return out


def _read_neighbors_csv(text: str) -> dict[str, tuple[str, ...]]:
    adjacency: dict[str, list[str]] = {}
    for row in csv.DictReader(text.splitlines()):
        adjacency.setdefault(row["country"].strip(), []).append(row["neighbor"].strip())
    return {c: tuple(ns) for c, ns in adjacency.items()}


def load_scores(
    matrix_path: str | Path | None = None,
    neighbors_path: str | Path | None = None,
) -> CultureMatrix:
    """Load a score matrix CSV (country,pd,idv,msc,ua,lto,idg; empty cell =
    missing) and a neighbor list CSV (country,neighbor). Defaults to the
    bundled data."""
    if matrix_path is None:
        matrix_text = resources.files("loanlens.data").joinpath(
            "hofstede_matrix.csv"
        ).read_text(encoding="utf-8")
    else:
        matrix_text = Path(matrix_path).read_text(encoding="utf-8")
    if neighbors_path is None:
        neighbors_text = resources.files("loanlens.data").joinpath(
            "hofstede_neighbors.csv"
        ).read_text(encoding="utf-8")
    else:
        neighbors_text = Path(neighbors_path).read_text(encoding="utf-8")
    return CultureMatrix(_read_matrix_csv(matrix_text), _read_neighbors_csv(neighbors_text))


def dimension_means(matrix: CultureMatrix) -> dict[str, float]:
    """Arithmetic mean per dimension over every country with an observed
    score for it (neighbor-filled values do not contribute)."""
    means = {}
    for dim in DIMENSIONS:
        values = matrix.raw_scores(dim)
        if not values:
            raise ContractError(f"no scores at all for dimension {dim!r}")
        means[dim] = sum(values) / len(values)
    return means


def resolve_country(
    registered_residence: str | None = None,
    registered_birth: str | None = None,
    questionnaire_residence: str | None = None,
    questionnaire_nationality: str | None = None,
) -> str:
    """Fixed precedence for choosing which reported country stands for a
    participant."""
    for candidate in (
        registered_residence,
        registered_birth,
        questionnaire_residence,
        questionnaire_nationality,
    ):
        if candidate:
            return candidate
    raise UnresolvedCountryError("no country information supplied")


@dataclass(frozen=True)
class DimensionGrouping:
    dimension: str
    mean: float
    assignment: Mapping[str, str]  # session_id -> High | Low
    unresolved: tuple[str, ...] = ()

    def sessions_in(self, side: str) -> list[str]:
        return sorted(sid for sid, s in self.assignment.items() if s == side)


def assign_groups(
    session_countries: Mapping[str, str],
    matrix: CultureMatrix,
    means: Mapping[str, float] | None = None,
) -> list[DimensionGrouping]:
    """Six groupings, one per dimension. High means the session country's
    score is strictly greater than the dimension mean; a score equal to the
    mean lands in Low. Sessions whose country cannot be resolved are
    excluded and flagged."""
    if means is None:
        means = dimension_means(matrix)
    resolved: dict[str, CultureScores] = {}
    unresolved: list[str] = []
    for sid in sorted(session_countries):
        try:
            resolved[sid] = matrix.resolve(session_countries[sid])
        except UnresolvedCountryError:
            unresolved.append(sid)
    groupings = []
    for dim in DIMENSIONS:
        assignment = {
            sid: HIGH if scores.score(dim) > means[dim] else LOW
            for sid, scores in resolved.items()
        }
        groupings.append(
            DimensionGrouping(
                dimension=dim,
                mean=float(means[dim]),
                assignment=assignment,
                unresolved=tuple(unresolved),
            )
        )
    return groupings


def group_fairness_delta(
    grouping: DimensionGrouping,
    suggestions: Sequence[WeightSuggestion],
    model: ScoringModel,
    apps: Sequence[Application],
    group: GroupSpec,
) -> dict[str, FairnessReport]:
    """Aggregate each subgroup's suggestions separately and report the DI
    after each; a subgroup with no suggestions reports the original model's
    DI."""
    out: dict[str, FairnessReport] = {}
    effective = effective_suggestions(list(suggestions))
    for side in (HIGH, LOW):
        members = set(grouping.sessions_in(side))
        subgroup = [s for s in effective if s.session_id in members]
        adjusted = aggregate(subgroup, model, apps)
        _, after = fairness_delta(adjusted, group)
        out[side] = after
    return out
