"""Synthetic loan-application generator with a planted nationality bias.

Stands in for a proprietary bank dataset: 30 raw attributes of which four
carry enough missing cells to be pruned at the 10% threshold, leaving the
26 attributes the scoring model uses. Labels are drawn from a latent linear
utility; foreign applicants receive a penalty of ``bias_strength`` on that
utility, calibrated so a model trained on the default configuration lands
in the unfair disparate-impact regime on nationality.
"""

from __future__ import annotations

import numpy as np

from .dataset import (
    ACCEPTED,
    BINARY,
    CATEGORICAL,
    CONTINUOUS,
    REJECTED,
    Application,
    AttributeSpec,
    Dataset,
)
from .errors import ContractError

# Calibrated so generate -> prune -> split(0.7) -> train -> audit puts the
# nationality disparate impact near the low-0.7 range across seeds.
DEFAULT_BIAS_STRENGTH = 0.9

# Sharpness of the Bernoulli label draw around the latent utility.
_LABEL_SCALE = 3.0

NATIONALITY = "nationality"
FOREIGN = "foreign"
CITIZEN = "citizen"

_APPLICANT = "applicant-provided"
_THIRD_PARTY = "third-party"
_BANK = "bank-internal"


def synthetic_schema() -> tuple[AttributeSpec, ...]:
    """The 30 raw attributes (17 study attributes, 9 fillers, 4 missing-heavy)."""
    return (
        AttributeSpec(NATIONALITY, BINARY, (CITIZEN, FOREIGN), _APPLICANT, sensitive=True),
        AttributeSpec("gender", BINARY, ("female", "male"), _APPLICANT, sensitive=True),
        AttributeSpec("age", CONTINUOUS, (), _APPLICANT, sensitive=True),
        AttributeSpec("monthly_income", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("number_of_earners", CONTINUOUS, (), _APPLICANT),
        AttributeSpec(
            "income_contributor", CATEGORICAL, ("applicant", "partner", "both"), _APPLICANT
        ),
        AttributeSpec("maximum_monthly_payment", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("loan_amount", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("annual_interest", CONTINUOUS, (), _BANK),
        AttributeSpec(
            "purpose_of_loan",
            CATEGORICAL,
            ("home_improvement", "car", "business", "education", "debt_consolidation", "other"),
            _APPLICANT,
        ),
        AttributeSpec("type_of_loan", BINARY, ("secured", "unsecured"), _BANK),
        AttributeSpec("credit_risk_level", CATEGORICAL, ("low", "medium", "high"), _BANK),
        AttributeSpec("has_joint_mortgage", BINARY, ("no", "yes"), _APPLICANT),
        AttributeSpec("years_of_business_with_bank", CONTINUOUS, (), _BANK),
        AttributeSpec("insurance", BINARY, ("no", "yes"), _APPLICANT),
        AttributeSpec("loan_duration", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("monthly_payments", CONTINUOUS, (), _BANK),
        AttributeSpec(
            "employment_status",
            CATEGORICAL,
            ("employed", "self_employed", "retired", "unemployed"),
            _APPLICANT,
        ),
        AttributeSpec(
            "residence_status", CATEGORICAL, ("owner", "renter", "with_family"), _APPLICANT
        ),
        AttributeSpec(
            "postcode_region", CATEGORICAL, ("north", "south", "east", "west", "central"),
            _APPLICANT,
        ),
        AttributeSpec("household_size", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("savings_balance", CONTINUOUS, (), _THIRD_PARTY),
        AttributeSpec("existing_loan_count", CONTINUOUS, (), _THIRD_PARTY),
        AttributeSpec("years_at_address", CONTINUOUS, (), _APPLICANT),
        AttributeSpec("money_laundering_check", BINARY, ("clear", "flagged"), _BANK),
        AttributeSpec("guarantor", BINARY, ("no", "yes"), _APPLICANT),
        # Missing-heavy attributes, pruned at the default 10% threshold.
        AttributeSpec("credit_score", CONTINUOUS, (), _BANK),
        AttributeSpec("collateral_value", CONTINUOUS, (), _THIRD_PARTY),
        AttributeSpec("previous_defaults", CONTINUOUS, (), _THIRD_PARTY),
        AttributeSpec("guarantor_income", CONTINUOUS, (), _APPLICANT),
    )


# Exact missing-cell counts are planted per attribute so the pruning path is
# exercised deterministically: > 0.10 prunes, the rest get imputed.
_MISSING_RATES = {
    "monthly_income": 0.02,
    "savings_balance": 0.05,
    "years_at_address": 0.03,
    "income_contributor": 0.02,
    "credit_score": 0.14,
    "collateral_value": 0.13,
    "previous_defaults": 0.17,
    "guarantor_income": 0.15,
}


def generate_synthetic(
    n: int, seed: int, bias_strength: float = DEFAULT_BIAS_STRENGTH
) -> Dataset:
    """Pure function of ``(n, seed, bias_strength)``; n must be >= 100."""
    if n < 100:
        raise ContractError("synthetic datasets need n >= 100")
    rng = np.random.default_rng(seed)
    schema = synthetic_schema()

    z = rng.normal(0.0, 1.0, n)  # latent creditworthiness

    foreign = (rng.random(n) < 0.50).astype(int)
    gender = (rng.random(n) < 0.5).astype(int)
    age = np.round(np.clip(rng.normal(42.0, 12.0, n), 18.0, 75.0), 1)
    income = np.round(
        800.0 + 2400.0 * np.exp(0.45 * (0.75 * z + 0.66 * rng.normal(0.0, 1.0, n))), 2
    )
    earners = 1.0 + rng.binomial(3, 0.3, n)
    contributor = rng.choice(3, size=n, p=[0.60, 0.25, 0.15])
    max_payment = np.round(income * rng.uniform(0.18, 0.42, n), 2)
    loan_amount = np.round(np.clip(9000.0 * np.exp(0.8 * rng.normal(0.0, 1.0, n)), 1000.0, 120000.0), 2)
    interest = np.round(np.clip(rng.normal(5.2, 1.4, n), 1.5, 12.0), 2)
    purpose = rng.choice(6, size=n, p=[0.28, 0.22, 0.14, 0.10, 0.16, 0.10])
    loan_type = (rng.random(n) < 0.50).astype(int)  # 1 = unsecured
    risk_latent = -z + rng.normal(0.0, 0.6, n)
    risk = np.digitize(risk_latent, [-0.55, 0.75])  # 0 low, 1 medium, 2 high
    joint_mortgage = (rng.random(n) < 0.30).astype(int)
    years_bank = np.round(np.clip(rng.exponential(6.0, n) * (1.0 + 0.15 * z), 0.0, 40.0), 1)
    insurance = (rng.random(n) < 0.55).astype(int)
    duration = np.round(np.clip(rng.normal(90.0, 60.0, n), 6.0, 360.0))
    monthly_payment = np.round(
        loan_amount / duration * (1.0 + interest / 100.0 * duration / 24.0)
        * rng.uniform(0.95, 1.05, n),
        2,
    )
    employment = rng.choice(4, size=n, p=[0.62, 0.18, 0.12, 0.08])
    residence = rng.choice(3, size=n, p=[0.45, 0.40, 0.15])
    postcode = rng.choice(5, size=n)
    household = 1.0 + rng.binomial(5, 0.3, n)
    savings = np.round(5000.0 * np.exp(0.9 * (0.6 * z + 0.8 * rng.normal(0.0, 1.0, n))), 2)
    existing_loans = rng.poisson(0.8, n).astype(float)
    years_address = np.round(np.clip(rng.exponential(7.0, n), 0.0, 40.0), 1)
    laundering = (rng.random(n) < 0.04).astype(int)  # 1 = flagged
    guarantor = (rng.random(n) < 0.25).astype(int)
    credit_score = np.round(np.clip(550.0 + 120.0 * z + 60.0 * rng.normal(0.0, 1.0, n), 300.0, 850.0))
    collateral = np.round(np.where(loan_type == 0, loan_amount * rng.uniform(0.8, 1.6, n), 0.0), 2)
    defaults = rng.poisson(np.where(z < -1.0, 0.55, 0.30)).astype(float)
    guarantor_income = np.round(
        np.where(guarantor == 1, 1200.0 + 1800.0 * np.exp(0.4 * rng.normal(0.0, 1.0, n)), 0.0), 2
    )

    # Every term is affine in the attribute value, so the acceptance process
    # is a logistic model over the encoded attributes plus the two
    # missing-heavy (hence unobserved after pruning) nuisance terms.
    utility = (
        0.10
        + 0.90 * (income - 2600.0) / 1800.0
        + 0.55 * (max_payment - 780.0) / 600.0
        + 0.50 * (savings - 9000.0) / 12000.0
        + 0.45 * (years_bank - 6.0) / 6.0
        - 0.75 * (risk - 1.0)
        - 0.60 * (loan_amount - 12000.0) / 9000.0
        - 0.35 * (interest - 5.2) / 1.4
        - 0.30 * (existing_loans - 0.8)
        - 1.50 * laundering
        + 0.35 * insurance
        + 0.30 * (earners - 1.9)
        - 0.25 * employment
        - 0.03 * purpose
        - 0.20 * (duration - 90.0) / 60.0
        - 0.25 * (monthly_payment - 480.0) / 400.0
        + 0.10 * (age - 42.0) / 12.0
        + 0.20 * guarantor
        + 0.10 * (credit_score - 550.0) / 120.0
        - 0.10 * defaults
        - 0.10 * joint_mortgage
        - bias_strength * foreign
    )
    accept = rng.random(n) < _sigmoid(_LABEL_SCALE * utility)

    columns: dict[str, np.ndarray] = {
        NATIONALITY: foreign.astype(float),
        "gender": gender.astype(float),
        "age": age,
        "monthly_income": income,
        "number_of_earners": earners,
        "income_contributor": contributor.astype(float),
        "maximum_monthly_payment": max_payment,
        "loan_amount": loan_amount,
        "annual_interest": interest,
        "purpose_of_loan": purpose.astype(float),
        "type_of_loan": loan_type.astype(float),
        "credit_risk_level": risk.astype(float),
        "has_joint_mortgage": joint_mortgage.astype(float),
        "years_of_business_with_bank": years_bank,
        "insurance": insurance.astype(float),
        "loan_duration": duration,
        "monthly_payments": monthly_payment,
        "employment_status": employment.astype(float),
        "residence_status": residence.astype(float),
        "postcode_region": postcode.astype(float),
        "household_size": household,
        "savings_balance": savings,
        "existing_loan_count": existing_loans,
        "years_at_address": years_address,
        "money_laundering_check": laundering.astype(float),
        "guarantor": guarantor.astype(float),
        "credit_score": credit_score,
        "collateral_value": collateral,
        "previous_defaults": defaults,
        "guarantor_income": guarantor_income,
    }

    # Plant missing cells with exact counts so pruning behaves identically
    # for every seed.
    missing: dict[str, set[int]] = {}
    for name, rate in _MISSING_RATES.items():
        k = int(round(rate * n))
        missing[name] = set(rng.permutation(n)[:k].tolist())

    width = max(4, len(str(n)))
    apps = []
    for i in range(n):
        values: dict[str, float | None] = {}
        for spec in schema:
            if spec.name in missing and i in missing[spec.name]:
                values[spec.name] = None
            else:
                values[spec.name] = float(columns[spec.name][i])
        apps.append(
            Application(
                id=f"A{i + 1:0{width}d}",
                values=values,
                label=ACCEPTED if accept[i] else REJECTED,
            )
        )

    return Dataset(
        attributes=schema,
        applications=tuple(apps),
        label_name="decision",
        metadata={
            "generator": {
                "name": "loanlens-synthetic",
                "version": 1,
                "n": n,
                "seed": seed,
                "bias_strength": bias_strength,
            }
        },
    )


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out
