"""Nonparametric and correlation statistics plus study-report assembly.

Rank tests use midranks for ties. Small samples get exact permutation
p-values (full enumeration, or a rank-sum counting recurrence when there
are no ties); larger samples use the normal / chi-squared approximation
with tie correction. All p-values are two-sided; the exact two-sided
definition is the probability of a statistic at least as far from its
null mean as the observed one, which the permutation distribution's
symmetry makes well-defined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import chi2 as chi2_dist
from scipy.stats import norm as norm_dist
from scipy.stats import t as t_dist

from .errors import ContractError
from .fairness import FairnessReport
from .feedback import FairnessJudgment, effective_judgments

# Auto method thresholds: exact when both samples are at most this size...
EXACT_MAX_SAMPLE = 20
# ...and the permutation count stays within budget (full enumeration).
ENUMERATION_CAP = 200_000
KRUSKAL_ENUMERATION_CAP = 100_000

ALPHA = 0.05


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    group_sizes: tuple[int, ...]
    exact: bool = False
    note: str = ""

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ContractError(f"p-value {self.p_value} outside [0, 1]")
        if not math.isfinite(self.statistic):
            raise ContractError("test statistic must be finite")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "group_sizes": list(self.group_sizes),
            "exact": self.exact,
            "note": self.note,
        }


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _tie_term(values: Sequence[float]) -> float:
    """Sum of t^3 - t over groups of tied values."""
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return float(sum(t**3 - t for t in counts.values() if t > 1))


def _u_statistic(x: Sequence[float], y: Sequence[float]) -> float:
    pooled = list(x) + list(y)
    ranks = _midranks(pooled)
    r_x = sum(ranks[: len(x)])
    return r_x - len(x) * (len(x) + 1) / 2.0


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------

def mann_whitney_u(
    x: Sequence[float], y: Sequence[float], method: str = "auto"
) -> TestResult:
    """Two-sided Mann-Whitney U test; the statistic is U for the first
    sample. ``method`` is auto, exact, or asymptotic."""
    x, y = list(map(float, x)), list(map(float, y))
    if not x or not y:
        raise ContractError("both samples must be nonempty")
    if method not in ("auto", "exact", "asymptotic"):
        raise ContractError(f"unknown method {method!r}")
    nx, ny = len(x), len(y)
    u_obs = _u_statistic(x, y)
    pooled = x + y
    has_ties = len(set(pooled)) < len(pooled)

    if method == "auto":
        if nx <= EXACT_MAX_SAMPLE and ny <= EXACT_MAX_SAMPLE:
            if math.comb(nx + ny, nx) <= ENUMERATION_CAP:
                method = "exact"
            elif not has_ties:
                method = "exact"
            else:
                method = "asymptotic"
        else:
            method = "asymptotic"

    if method == "exact":
        if math.comb(nx + ny, nx) <= ENUMERATION_CAP:
            p = _mw_exact_enumeration(pooled, nx, u_obs)
        elif not has_ties:
            p = _mw_exact_counting(nx, ny, u_obs)
        else:
            raise ContractError(
                "exact test with ties needs a permutation count within "
                f"{ENUMERATION_CAP}; got C({nx + ny},{nx})"
            )
        return TestResult(
            method="mann-whitney-u",
            statistic=u_obs,
            p_value=p,
            group_sizes=(nx, ny),
            exact=True,
        )

    n = nx + ny
    mu = nx * ny / 2.0
    tie = _tie_term(pooled)
    var = nx * ny / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0.0:
        return TestResult(
            method="mann-whitney-u",
            statistic=u_obs,
            p_value=1.0,
            group_sizes=(nx, ny),
            note="degenerate: all pooled values tied",
        )
    z = (u_obs - mu) / math.sqrt(var)
    p = float(2.0 * norm_dist.sf(abs(z)))
    return TestResult(
        method="mann-whitney-u",
        statistic=u_obs,
        p_value=min(1.0, p),
        group_sizes=(nx, ny),
    )


def _mw_exact_enumeration(pooled: Sequence[float], nx: int, u_obs: float) -> float:
    ranks = _midranks(pooled)
    n = len(pooled)
    ny = n - nx
    mu = nx * ny / 2.0
    d_obs = abs(u_obs - mu) - 1e-12
    offset = nx * (nx + 1) / 2.0
    hits = total = 0
    for combo in itertools.combinations(range(n), nx):
        u = sum(ranks[i] for i in combo) - offset
        total += 1
        if abs(u - mu) >= d_obs:
            hits += 1
    return hits / total


def _mw_exact_counting(nx: int, ny: int, u_obs: float) -> float:
    """No-ties exact path: count size-nx subsets of ranks 1..N by rank sum."""
    n = nx + ny
    max_sum = sum(range(n - nx + 1, n + 1))
    ways = [[0] * (max_sum + 1) for _ in range(nx + 1)]
    ways[0][0] = 1
    for r in range(1, n + 1):
        for k in range(min(nx, r), 0, -1):
            row, prev = ways[k], ways[k - 1]
            for s in range(max_sum, r - 1, -1):
                if prev[s - r]:
                    row[s] += prev[s - r]
    offset = nx * (nx + 1) // 2
    # compare 2U against 2*mu = nx*ny in exact integer arithmetic
    d_obs = abs(round(2 * u_obs) - nx * ny)
    hits = total = 0
    for s, count in enumerate(ways[nx]):
        if not count:
            continue
        u2 = 2 * (s - offset)
        total += count
        if abs(u2 - nx * ny) >= d_obs:
            hits += count
    return hits / total


# ---------------------------------------------------------------------------
# Kruskal-Wallis
# ---------------------------------------------------------------------------

def _h_statistic(groups: Sequence[Sequence[float]]) -> float:
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    ranks = _midranks(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = sum(ranks[start : start + len(g)])
        h += r * r / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    tie = _tie_term(pooled)
    denom = 1.0 - tie / (n**3 - n)
    if denom <= 0.0:
        return 0.0  # every pooled value identical
    return h / denom


def _multinomial(sizes: Sequence[int]) -> int:
    total = math.factorial(sum(sizes))
    for s in sizes:
        total //= math.factorial(s)
    return total


def kruskal_wallis(
    groups: Sequence[Sequence[float]], method: str = "auto"
) -> TestResult:
    """Kruskal-Wallis H with tie correction; p from the chi-squared
    approximation with k-1 degrees of freedom, or exact permutation
    enumeration for small samples."""
    groups = [list(map(float, g)) for g in groups]
    if len(groups) < 2 or any(not g for g in groups):
        raise ContractError("need at least two nonempty groups")
    if method not in ("auto", "exact", "asymptotic"):
        raise ContractError(f"unknown method {method!r}")
    sizes = tuple(len(g) for g in groups)
    h_obs = _h_statistic(groups)

    if method == "auto":
        method = (
            "exact"
            if _multinomial(sizes) <= KRUSKAL_ENUMERATION_CAP
            else "asymptotic"
        )

    if method == "exact":
        p = _kw_exact_enumeration(groups, h_obs)
        return TestResult(
            method="kruskal-wallis",
            statistic=h_obs,
            p_value=p,
            group_sizes=sizes,
            exact=True,
        )

    p = float(chi2_dist.sf(h_obs, len(groups) - 1))
    return TestResult(
        method="kruskal-wallis", statistic=h_obs, p_value=p, group_sizes=sizes
    )


def _kw_exact_enumeration(groups: Sequence[Sequence[float]], h_obs: float) -> float:
    pooled = [v for g in groups for v in g]
    sizes = [len(g) for g in groups]
    n = len(pooled)
    ranks = _midranks(pooled)
    tie = _tie_term(pooled)
    denom = 1.0 - tie / (n**3 - n)
    threshold = h_obs - 1e-9
    hits = total = 0

    def h_from_ranksums(ranksums: Sequence[float]) -> float:
        h = 12.0 / (n * (n + 1)) * sum(
            r * r / s for r, s in zip(ranksums, sizes)
        ) - 3.0 * (n + 1)
        return 0.0 if denom <= 0.0 else h / denom

    def recurse(remaining: tuple[int, ...], g: int, ranksums: list[float]):
        nonlocal hits, total
        if g == len(sizes) - 1:
            ranksums.append(sum(ranks[i] for i in remaining))
            total += 1
            if h_from_ranksums(ranksums) >= threshold:
                hits += 1
            ranksums.pop()
            return
        for combo in itertools.combinations(remaining, sizes[g]):
            chosen = set(combo)
            ranksums.append(sum(ranks[i] for i in combo))
            recurse(tuple(i for i in remaining if i not in chosen), g + 1, ranksums)
            ranksums.pop()

    recurse(tuple(range(n)), 0, [])
    return hits / total


# ---------------------------------------------------------------------------
# Pearson correlation
# ---------------------------------------------------------------------------

def pearson_r(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Pearson's r with a two-sided p from the t distribution (n-2 df)."""
    x = np.asarray(list(x), dtype=float)
    y = np.asarray(list(y), dtype=float)
    if len(x) != len(y):
        raise ContractError("samples must have equal length")
    n = len(x)
    if n < 3:
        raise ContractError("need at least 3 paired observations")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float((dx * dx).sum())
    vy = float((dy * dy).sum())
    if vx == 0.0 or vy == 0.0:
        raise ContractError("zero variance in a sample")
    r = float((dx * dy).sum() / math.sqrt(vx * vy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * t_dist.sf(abs(t_stat), n - 2))
    return TestResult(
        method="pearson-r", statistic=r, p_value=min(1.0, p), group_sizes=(n,)
    )


# ---------------------------------------------------------------------------
# Steel-Dwass post-hoc
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairwiseComparison:
    group_a: str
    group_b: str
    statistic: float
    p_value: float
    method: str = "steel-dwass"
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "group_a": self.group_a,
            "group_b": self.group_b,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "method": self.method,
            "note": self.note,
        }


def studentized_range_sf(q: float, k: int) -> float:
    """P(Q >= q) for the range of k iid standard normals (infinite df)."""
    if q <= 0.0:
        return 1.0

    def integrand(z):
        return norm_dist.pdf(z) * (norm_dist.cdf(z) - norm_dist.cdf(z - q)) ** (k - 1)

    cdf, _ = integrate.quad(integrand, -np.inf, np.inf, limit=200)
    return float(min(1.0, max(0.0, 1.0 - k * cdf)))


def steel_dwass(
    groups: Sequence[Sequence[float]], labels: Sequence[str] | None = None
) -> list[PairwiseComparison]:
    """All-pairs comparisons with the studentized-range adjustment over the
    k groups. Falls back to Bonferroni-adjusted pairwise Mann-Whitney
    (flagged in the note) if the range distribution fails to evaluate."""
    groups = [list(map(float, g)) for g in groups]
    if len(groups) < 2 or any(not g for g in groups):
        raise ContractError("need at least two nonempty groups")
    k = len(groups)
    if labels is None:
        labels = [f"group{i}" for i in range(k)]
    out = []
    for i, j in itertools.combinations(range(k), 2):
        gi, gj = groups[i], groups[j]
        ni, nj = len(gi), len(gj)
        n = ni + nj
        ranks = _midranks(gi + gj)
        r_i = sum(ranks[:ni])
        expected = ni * (n + 1) / 2.0
        var = (
            ni * nj / (n * (n - 1.0))
            * (sum(r * r for r in ranks) - n * (n + 1.0) ** 2 / 4.0)
        )
        if var <= 0.0:
            out.append(
                PairwiseComparison(
                    labels[i], labels[j], 0.0, 1.0, note="degenerate: all values tied"
                )
            )
            continue
        t_stat = (r_i - expected) / math.sqrt(var)
        try:
            p = studentized_range_sf(math.sqrt(2.0) * abs(t_stat), k)
            note = ""
        except Exception:
            p = min(1.0, mann_whitney_u(gi, gj).p_value * (k * (k - 1) / 2))
            note = "bonferroni fallback"
        out.append(PairwiseComparison(labels[i], labels[j], t_stat, p, note=note))
    return out


# ---------------------------------------------------------------------------
# study report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureContrast:
    measure: str
    high_mean: float
    high_sd: float
    low_mean: float
    low_sd: float
    test: TestResult | None

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "high_mean": self.high_mean,
            "high_sd": self.high_sd,
            "low_mean": self.low_mean,
            "low_sd": self.low_sd,
            "test": self.test.to_dict() if self.test else None,
        }


@dataclass(frozen=True)
class DimensionTable:
    dimension: str
    label: str
    high_n: int
    low_n: int
    contrasts: tuple[MeasureContrast, ...]

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "label": self.label,
            "high_n": self.high_n,
            "low_n": self.low_n,
            "contrasts": [c.to_dict() for c in self.contrasts],
        }


@dataclass(frozen=True)
class StudyReport:
    n_sessions: int
    mean_judged_fair: float
    mean_judged_unfair: float
    mean_unfairness_ratio: float | None
    rating_correlation: TestResult | None
    dimension_tables: tuple[DimensionTable, ...]
    between_groups: TestResult | None
    posthoc: tuple[PairwiseComparison, ...]
    di_by_group: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    original_di: float | None = None
    di_threshold: float = 0.8
    flagged: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "n_sessions": self.n_sessions,
            "mean_judged_fair": self.mean_judged_fair,
            "mean_judged_unfair": self.mean_judged_unfair,
            "mean_unfairness_ratio": self.mean_unfairness_ratio,
            "rating_correlation": (
                self.rating_correlation.to_dict() if self.rating_correlation else None
            ),
            "dimension_tables": [t.to_dict() for t in self.dimension_tables],
            "between_groups": (
                self.between_groups.to_dict() if self.between_groups else None
            ),
            "posthoc": [p.to_dict() for p in self.posthoc],
            "di_by_group": {d: dict(v) for d, v in self.di_by_group.items()},
            "original_di": self.original_di,
            "di_threshold": self.di_threshold,
            "flagged": list(self.flagged),
        }

    def render_text(self) -> str:
        lines = [f"Study report over {self.n_sessions} sessions"]
        lines.append(
            f"  mean judged fair {self.mean_judged_fair:.2f}, "
            f"unfair {self.mean_judged_unfair:.2f}, "
            f"mean unfairness ratio "
            + (
                f"{self.mean_unfairness_ratio:.3f}"
                if self.mean_unfairness_ratio is not None
                else "n/a"
            )
        )
        if self.rating_correlation:
            rc = self.rating_correlation
            lines.append(
                f"  post-rating vs unfairness ratio: r = {rc.statistic:.3f}, "
                f"p = {rc.p_value:.4g}"
            )
        for table in self.dimension_tables:
            lines.append(f"  {table.label} (High n={table.high_n}, Low n={table.low_n})")
            for c in table.contrasts:
                if c.test is None:
                    lines.append(f"    {c.measure:<18} insufficient data")
                    continue
                star = " *" if c.test.p_value < ALPHA else ""
                lines.append(
                    f"    {c.measure:<18} High {c.high_mean:7.3f} ({c.high_sd:6.3f})  "
                    f"Low {c.low_mean:7.3f} ({c.low_sd:6.3f})  "
                    f"U = {c.test.statistic:.1f}, p = {c.test.p_value:.4f}{star}"
                )
        if self.between_groups:
            bg = self.between_groups
            lines.append(
                f"  Between all groups (judged unfair): H = {bg.statistic:.2f}, "
                f"p = {bg.p_value:.4f}"
            )
        if self.di_by_group:
            lines.append(
                "  Disparate impact after group-wise aggregation "
                f"(original {self.original_di:.3f}, threshold {self.di_threshold}):"
                if self.original_di is not None
                else "  Disparate impact after group-wise aggregation:"
            )
            for dim, sides in self.di_by_group.items():
                parts = ", ".join(
                    f"{side} {value:.3f}" for side, value in sides.items()
                )
                lines.append(f"    {dim}: {parts}")
        if self.flagged:
            lines.append("  Flagged contrasts (p < 0.05):")
            for f in self.flagged:
                lines.append(f"    {f}")
        return "\n".join(lines)


def _session_counts(
    judgments: Sequence[FairnessJudgment],
) -> dict[str, tuple[int, int]]:
    counts: dict[str, tuple[int, int]] = {}
    for j in effective_judgments(judgments):
        fair, unfair = counts.get(j.session_id, (0, 0))
        if j.verdict == "fair":
            counts[j.session_id] = (fair + 1, unfair)
        elif j.verdict == "unfair":
            counts[j.session_id] = (fair, unfair + 1)
    return counts


def study_report(
    session_countries: Mapping[str, str],
    judgments: Sequence[FairnessJudgment],
    groupings: Sequence[Any],
    di_by_group: Mapping[str, Mapping[str, float]] | None = None,
    original_report: FairnessReport | None = None,
    post_ratings: Mapping[str, float] | None = None,
) -> StudyReport:
    """Assemble per-dimension High/Low contrast tables (judged fair, judged
    unfair, unfairness ratio with Mann-Whitney U tests), the all-groups
    comparison, and the DI-per-group block."""
    from .culture import DIMENSION_LABELS, HIGH, LOW  # local: avoids cycle

    sessions = sorted(session_countries)
    counts = _session_counts(judgments)
    per_fair = {sid: counts.get(sid, (0, 0))[0] for sid in sessions}
    per_unfair = {sid: counts.get(sid, (0, 0))[1] for sid in sessions}
    per_ratio = {
        sid: per_unfair[sid] / (per_fair[sid] + per_unfair[sid])
        for sid in sessions
        if per_fair[sid] + per_unfair[sid] > 0
    }

    n = len(sessions)
    mean_fair = sum(per_fair.values()) / n if n else 0.0
    mean_unfair = sum(per_unfair.values()) / n if n else 0.0
    mean_ratio = (
        sum(per_ratio.values()) / len(per_ratio) if per_ratio else None
    )

    rating_corr = None
    if post_ratings:
        paired = [
            (per_ratio[sid], float(post_ratings[sid]))
            for sid in sessions
            if sid in per_ratio and sid in post_ratings
        ]
        if len(paired) >= 3:
            ratios, ratings = zip(*paired)
            try:
                rating_corr = pearson_r(ratings, ratios)
            except ContractError:
                rating_corr = None

    tables: list[DimensionTable] = []
    flagged: list[str] = []
    group_unfair_samples: list[list[float]] = []
    group_labels: list[str] = []
    for grouping in groupings:
        dim = grouping.dimension
        high = [sid for sid in sessions if grouping.assignment.get(sid) == HIGH]
        low = [sid for sid in sessions if grouping.assignment.get(sid) == LOW]
        contrasts = []
        for measure, values in (
            ("judged_fair", per_fair),
            ("judged_unfair", per_unfair),
            ("unfairness_ratio", per_ratio),
        ):
            hv = [float(values[sid]) for sid in high if sid in values]
            lv = [float(values[sid]) for sid in low if sid in values]
            test = None
            if hv and lv:
                test = mann_whitney_u(hv, lv)
                if test.p_value < ALPHA:
                    flagged.append(
                        f"{dim}:{measure} U = {test.statistic:.1f}, "
                        f"p = {test.p_value:.4g}"
                    )
            contrasts.append(
                MeasureContrast(
                    measure=measure,
                    high_mean=float(np.mean(hv)) if hv else 0.0,
                    high_sd=float(np.std(hv)) if hv else 0.0,
                    low_mean=float(np.mean(lv)) if lv else 0.0,
                    low_sd=float(np.std(lv)) if lv else 0.0,
                    test=test,
                )
            )
        tables.append(
            DimensionTable(
                dimension=dim,
                label=DIMENSION_LABELS.get(dim, dim),
                high_n=len(high),
                low_n=len(low),
                contrasts=tuple(contrasts),
            )
        )
        for side, members in ((HIGH, high), (LOW, low)):
            if members:
                group_unfair_samples.append([float(per_unfair[sid]) for sid in members])
                group_labels.append(f"{dim}-{side[0]}")

    between = None
    posthoc: tuple[PairwiseComparison, ...] = ()
    if len(group_unfair_samples) >= 2:
        between = kruskal_wallis(group_unfair_samples, method="asymptotic")
        posthoc = tuple(steel_dwass(group_unfair_samples, group_labels))

    return StudyReport(
        n_sessions=n,
        mean_judged_fair=mean_fair,
        mean_judged_unfair=mean_unfair,
        mean_unfairness_ratio=mean_ratio,
        rating_correlation=rating_corr,
        dimension_tables=tuple(tables),
        between_groups=between,
        posthoc=posthoc,
        di_by_group=dict(di_by_group or {}),
        original_di=(
            original_report.disparate_impact if original_report is not None else None
        ),
        flagged=tuple(flagged),
    )
