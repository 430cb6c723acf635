import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loanlens import (
    Application,
    criticality,
    predict,
    similar_applications,
    similarity,
    train,
    value_distributions,
)
from loanlens.dataset import ACCEPTED, REJECTED
from loanlens.errors import ContractError, DegenerateDataError
from loanlens.model import (
    ScoringModel,
    attribute_similarities,
    loss_and_gradient,
    model_from_dict,
    model_similarity,
    model_to_dict,
    predict_all,
    sigmoid,
)

from conftest import make_dataset, spec_bin, spec_cat, spec_cont


def manual_model(weights, intercept, specs, scaling=None):
    return ScoringModel(
        weights=weights,
        intercept=intercept,
        attribute_order=tuple(s.name for s in specs),
        scaling=scaling or {s.name: (0.0, 1.0) for s in specs if not s.is_categorical},
        attributes=tuple(specs),
    )


class TestTraining:
    def test_separable_toy_accuracy(self, toy_model):
        # the fixture's 20 training points are linearly separable
        correct = 0
        rows = [
            (9, 1, ACCEPTED), (8, 2, ACCEPTED), (7, 1, ACCEPTED), (9, 3, ACCEPTED),
            (6, 2, ACCEPTED), (8, 0, ACCEPTED), (7, 2, ACCEPTED), (10, 2, ACCEPTED),
            (6, 1, ACCEPTED), (9, 0, ACCEPTED),
            (1, 9, REJECTED), (2, 8, REJECTED), (1, 7, REJECTED), (3, 9, REJECTED),
            (2, 6, REJECTED), (0, 8, REJECTED), (2, 7, REJECTED), (2, 10, REJECTED),
            (1, 6, REJECTED), (0, 9, REJECTED),
        ]
        for i, (x, y, label) in enumerate(rows):
            app = Application(
                id=f"P{i}", values={"income": float(x), "debt": float(y)}
            )
            if predict(toy_model, app).decision == label:
                correct += 1
        assert correct / len(rows) >= 0.95

    def test_training_deterministic(self):
        specs = (spec_cont("x"), spec_bin("b"))
        rows, labels = [], []
        rng = np.random.default_rng(3)
        for i in range(60):
            x = float(rng.normal())
            b = float(rng.integers(0, 2))
            rows.append({"x": x, "b": b})
            labels.append(ACCEPTED if x + b > 0.3 else REJECTED)
        ds = make_dataset(specs, rows, labels)
        m1 = train(ds, 1.0, 0)
        m2 = train(ds, 1.0, 0)
        for name in m1.attribute_order:
            assert abs(m1.weights[name] - m2.weights[name]) < 1e-12
        assert abs(m1.intercept - m2.intercept) < 1e-12

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(40, 6))
        y = (rng.random(40) < 0.5).astype(float)
        l2 = 1.0
        h = 1e-6
        for _ in range(5):
            theta = rng.normal(scale=0.8, size=7)
            _, grad = loss_and_gradient(theta, X, y, l2)
            for j in range(len(theta)):
                e = np.zeros_like(theta)
                e[j] = h
                f_plus, _ = loss_and_gradient(theta + e, X, y, l2)
                f_minus, _ = loss_and_gradient(theta - e, X, y, l2)
                fd = (f_plus - f_minus) / (2 * h)
                denom = max(1.0, abs(fd))
                assert abs(grad[j] - fd) / denom < 1e-5

    def test_loss_trace_non_increasing(self, pipeline):
        trace = pipeline["model"].training.loss_trace
        assert len(trace) > 2
        for earlier, later in zip(trace, trace[1:]):
            assert later <= earlier + 1e-12

    def test_single_class_training_set(self):
        ds = make_dataset(
            (spec_cont("x"),),
            [{"x": float(i)} for i in range(10)],
            [ACCEPTED] * 10,
        )
        with pytest.raises(DegenerateDataError):
            train(ds, 1.0, 0)

    def test_unlabeled_rows_rejected(self):
        ds = make_dataset((spec_cont("x"),), [{"x": 1.0}, {"x": 2.0}])
        with pytest.raises(ContractError):
            train(ds, 1.0, 0)

    def test_nonpositive_l2_rejected(self, pipeline):
        with pytest.raises(ContractError):
            train(pipeline["train"], 0.0, 0)

    def test_gradient_norm_recorded_below_tolerance(self, pipeline):
        assert pipeline["model"].training.gradient_norm <= 1e-6


class TestPredict:
    SPECS = (spec_cont("x"),)

    def test_zero_model_confidence_half_rejected(self):
        m = manual_model({"x": 0.0}, 0.0, self.SPECS)
        p = predict(m, Application(id="a", values={"x": 0.7}))
        assert p.confidence == 0.5
        assert p.decision == REJECTED  # tie at 50% is not "more than 50%"

    def test_sigmoid_of_one(self):
        # independent evaluation of 1/(1+e^-1)
        expected = 1.0 / (1.0 + math.exp(-1.0))
        m = manual_model({"x": 1.0}, 0.0, self.SPECS)
        p = predict(m, Application(id="a", values={"x": 1.0}))
        assert p.confidence == pytest.approx(expected, abs=1e-12)
        assert p.confidence == pytest.approx(0.73106, abs=5e-6)
        assert p.decision == ACCEPTED

    def test_negation_symmetry(self, pipeline):
        model = pipeline["model"]
        flipped = ScoringModel(
            weights={k: -v for k, v in model.weights.items()},
            intercept=-model.intercept,
            attribute_order=model.attribute_order,
            scaling=model.scaling,
            attributes=model.attributes,
        )
        for app in pipeline["test"].applications[:25]:
            c = predict(model, app).confidence
            c_neg = predict(flipped, app).confidence
            assert c_neg == pytest.approx(1.0 - c, abs=1e-12)

    def test_missing_attribute_contract_error(self, pipeline):
        app = Application(id="bad", values={"nationality": 0.0})
        with pytest.raises(ContractError):
            predict(pipeline["model"], app)

    def test_confidence_strictly_inside_unit_interval(self, pipeline):
        for app in pipeline["test"].applications[:50]:
            c = predict(pipeline["model"], app).confidence
            assert 0.0 < c < 1.0

    @given(
        w=st.floats(0.1, 4.0),
        x1=st.floats(0.0, 1.0),
        bump=st.floats(0.0, 1.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_positive_weight(self, w, x1, bump):
        m = manual_model({"x": w, "y": -0.7}, 0.1, (spec_cont("x"), spec_cont("y")))
        x2 = min(1.0, x1 + bump)
        lo = predict(m, Application(id="a", values={"x": x1, "y": 0.4}))
        hi = predict(m, Application(id="b", values={"x": x2, "y": 0.4}))
        assert hi.confidence >= lo.confidence

    def test_confidence_invariant_under_value_order(self, pipeline):
        model = pipeline["model"]
        app = pipeline["test"].applications[0]
        shuffled = Application(
            id=app.id,
            values=dict(reversed(list(app.values.items()))),
            label=app.label,
        )
        assert predict(model, app).confidence == predict(model, shuffled).confidence


class TestCriticality:
    def test_direct_product(self):
        m = manual_model({"x": 0.5}, 0.0, (spec_cont("x"),))
        c = criticality(m, Application(id="a", values={"x": 0.4}))
        assert c.entries["x"] == pytest.approx(0.2, abs=1e-12)

    def test_all_zero_values(self):
        specs = (spec_cont("x"), spec_cont("y"))
        m = manual_model({"x": 1.3, "y": -0.4}, 0.9, specs)
        c = criticality(m, Application(id="a", values={"x": 0.0, "y": 0.0}))
        assert all(v == 0.0 for v in c.entries.values())
        assert c.utility == pytest.approx(0.9, abs=1e-12)

    def test_sum_reproduces_utility_on_100_applications(self, pipeline):
        model = pipeline["model"]
        for app in pipeline["cleaned"].applications[:100]:
            c = criticality(model, app)
            expected_conf = predict(model, app).confidence
            assert sigmoid(c.utility) == pytest.approx(expected_conf, abs=1e-9)


class TestValueDistributions:
    def test_bin_edges_over_0_100(self):
        specs = (spec_cont("v"),)
        apps = [Application(id=f"a{i}", values={"v": float(v)}) for i, v in
                enumerate([0, 10, 25, 42, 55, 77, 90, 100])]
        m = manual_model({"v": 1.0}, 0.0, specs, scaling={"v": (0.0, 100.0)})
        preds = predict_all(m, apps)
        dist = value_distributions(m, apps, preds)[0]
        edges = [b.lo for b in dist.bins] + [dist.bins[-1].hi]
        assert edges == [0.0, 20.0, 40.0, 60.0, 80.0, 100.0]

    def test_uniform_accepted_hand_count(self):
        specs = (spec_cont("v"),)
        # 10 applications spread uniformly: 2 land in each of the 5 bins
        values = [0, 5, 20, 25, 40, 45, 60, 65, 80, 100]
        apps = [Application(id=f"a{i}", values={"v": float(v)})
                for i, v in enumerate(values)]
        m = manual_model({"v": 1.0}, 5.0, specs, scaling={"v": (0.0, 100.0)})
        preds = predict_all(m, apps)
        assert all(p.decision == ACCEPTED for p in preds)
        dist = value_distributions(m, apps, preds)[0]
        for b in dist.bins:
            assert b.accepted_pct == pytest.approx(20.0, abs=1e-9)
            assert b.rejected_pct == 0.0

    def test_percentages_sum_to_100(self, pipeline):
        model = pipeline["model"]
        apps = list(pipeline["test"].applications)
        preds = predict_all(model, apps)
        for dist in value_distributions(model, apps, preds):
            total = sum(b.accepted_pct + b.rejected_pct for b in dist.bins)
            assert total == pytest.approx(100.0, abs=0.01)

    def test_constant_attribute_single_bin_flagged(self):
        specs = (spec_cont("v"),)
        apps = [Application(id=f"a{i}", values={"v": 3.0}) for i in range(4)]
        m = manual_model({"v": 1.0}, 0.0, specs, scaling={"v": (3.0, 3.0)})
        dist = value_distributions(m, apps, predict_all(m, apps))[0]
        assert dist.constant
        assert len(dist.bins) == 1

    def test_misaligned_predictions_rejected(self, pipeline):
        model = pipeline["model"]
        apps = list(pipeline["test"].applications[:5])
        preds = predict_all(model, apps)[:4]
        with pytest.raises(ContractError):
            value_distributions(model, apps, preds)


class TestSimilarity:
    def _specs26(self):
        return tuple(spec_cont(f"c{i}") for i in range(25)) + (spec_bin("b"),)

    def test_identity_is_one(self, pipeline):
        model = pipeline["model"]
        app = pipeline["test"].applications[0]
        assert model_similarity(model, app, app) == pytest.approx(1.0, abs=1e-12)

    def test_26_attributes_one_at_opposite_endpoints(self):
        specs = self._specs26()
        ranges = {f"c{i}": (0.0, 1.0) for i in range(25)}
        a_values = {f"c{i}": 0.5 for i in range(25)}
        b_values = dict(a_values)
        a_values["c0"], b_values["c0"] = 0.0, 1.0
        a_values["b"] = b_values["b"] = 1.0
        a = Application(id="a", values=a_values)
        b = Application(id="b", values=b_values)
        # hand computation: 25 of 26 attributes identical, one fully apart
        assert similarity(a, b, specs, ranges) == pytest.approx(25 / 26, abs=1e-12)
        assert similarity(a, b, specs, ranges) == pytest.approx(0.96154, abs=5e-6)

    def test_symmetry_on_random_pairs(self, pipeline):
        model = pipeline["model"]
        apps = pipeline["test"].applications
        rng = np.random.default_rng(0)
        for _ in range(100):
            i, j = rng.integers(0, len(apps), size=2)
            assert model_similarity(model, apps[i], apps[j]) == pytest.approx(
                model_similarity(model, apps[j], apps[i]), abs=1e-12
            )

    def test_result_in_unit_interval(self, pipeline):
        model = pipeline["model"]
        apps = pipeline["test"].applications
        rng = np.random.default_rng(1)
        for _ in range(50):
            i, j = rng.integers(0, len(apps), size=2)
            s = model_similarity(model, apps[i], apps[j])
            assert 0.0 <= s <= 1.0

    def test_categorical_exact_match_rule(self):
        specs = (spec_cat("c", ("a", "b", "z")),)
        x = Application(id="x", values={"c": 0.0})
        y = Application(id="y", values={"c": 2.0})
        assert similarity(x, y, specs, {}) == 0.0
        assert similarity(x, x, specs, {}) == 1.0


class TestSimilarApplications:
    def test_full_range_all_selectable(self, pipeline):
        model = pipeline["model"]
        target = pipeline["test"].applications[0]
        pool = pipeline["test"].applications[:20]
        out = similar_applications(model, target, pool, (0.0, 1.0))
        assert all(item.selectable for item in out)

    def test_degenerate_range_nothing_selectable(self, pipeline):
        model = pipeline["model"]
        target = pipeline["test"].applications[0]
        pool = [a for a in pipeline["test"].applications[1:21]]
        out = similar_applications(model, target, pool, (1.0, 1.0))
        assert all(not item.selectable for item in out)

    def test_selectable_set_matches_brute_force(self, pipeline):
        model = pipeline["model"]
        target = pipeline["test"].applications[0]
        pool = list(pipeline["test"].applications[1:21])
        lo, hi = 0.55, 0.8
        out = similar_applications(model, target, pool, (lo, hi))
        # independent brute-force filter
        expected = {
            a.id for a in pool if lo <= model_similarity(model, target, a) <= hi
        }
        got = {item.application_id for item in out if item.selectable}
        assert got == expected
        assert {item.application_id for item in out} == {a.id for a in pool}

    def test_bad_range_rejected(self, pipeline):
        model = pipeline["model"]
        target = pipeline["test"].applications[0]
        with pytest.raises(ContractError):
            similar_applications(model, target, [], (0.9, 0.2))


class TestSerialization:
    def test_round_trip_is_bit_exact(self, pipeline, tmp_path):
        model = pipeline["model"]
        doc = json.loads(json.dumps(model_to_dict(model)))
        loaded = model_from_dict(doc)
        assert loaded.intercept == model.intercept
        for name in model.attribute_order:
            assert loaded.weights[name] == model.weights[name]
        for name in model.scaling:
            assert loaded.scaling[name] == model.scaling[name]
        assert loaded.attributes == model.attributes
        assert loaded.training.loss_trace == model.training.loss_trace

    def test_predictions_survive_round_trip(self, pipeline):
        model = pipeline["model"]
        loaded = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        for app in pipeline["test"].applications[:20]:
            assert predict(loaded, app).confidence == predict(model, app).confidence

    def test_format_guard(self):
        with pytest.raises(ContractError):
            model_from_dict({"format": "something-else"})
