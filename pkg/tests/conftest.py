import pytest

from loanlens import (
    AttributeSpec,
    Application,
    Dataset,
    generate_synthetic,
    prune_attributes,
    split,
    train,
)

ACCEPT = "accepted"
REJECT = "rejected"


def spec_cont(name, **kw):
    return AttributeSpec(name, "continuous", (), **kw)


def spec_bin(name, cats=("no", "yes"), **kw):
    return AttributeSpec(name, "binary", tuple(cats), **kw)


def spec_cat(name, cats, **kw):
    return AttributeSpec(name, "categorical", tuple(cats), **kw)


def make_dataset(specs, rows, labels=None):
    """rows: list of dicts of raw values (indices for categoricals)."""
    apps = []
    for i, row in enumerate(rows):
        label = labels[i] if labels is not None else None
        apps.append(Application(id=f"T{i + 1:03d}", values=dict(row), label=label))
    return Dataset(attributes=tuple(specs), applications=tuple(apps))


@pytest.fixture(scope="session")
def pipeline():
    """Default planted-bias pipeline at seed 0, shared across tests."""
    dataset = generate_synthetic(1000, 0)
    cleaned = prune_attributes(dataset, 0.10)
    train_part, test_part = split(cleaned, 0.7, 0)
    model = train(train_part, l2_strength=1.0, seed=0)
    return {
        "raw": dataset,
        "cleaned": cleaned,
        "train": train_part,
        "test": test_part,
        "model": model,
    }


@pytest.fixture(scope="session")
def toy_model():
    """Two continuous attributes on [0, 10]; trained on a separable-ish set."""
    specs = (spec_cont("income"), spec_cont("debt"))
    rows, labels = [], []
    pts = [
        (9, 1, ACCEPT), (8, 2, ACCEPT), (7, 1, ACCEPT), (9, 3, ACCEPT),
        (6, 2, ACCEPT), (8, 0, ACCEPT), (7, 2, ACCEPT), (10, 2, ACCEPT),
        (6, 1, ACCEPT), (9, 0, ACCEPT),
        (1, 9, REJECT), (2, 8, REJECT), (1, 7, REJECT), (3, 9, REJECT),
        (2, 6, REJECT), (0, 8, REJECT), (2, 7, REJECT), (2, 10, REJECT),
        (1, 6, REJECT), (0, 9, REJECT),
    ]
    for x, y, label in pts:
        rows.append({"income": float(x), "debt": float(y)})
        labels.append(label)
    dataset = make_dataset(specs, rows, labels)
    return train(dataset, l2_strength=1.0, seed=0)
