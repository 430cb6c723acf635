import concurrent.futures
import json
import shutil

import numpy as np
import pytest
from fastapi.testclient import TestClient

from loanlens.errors import CorruptLogError
from loanlens.service import create_app, replay_state
from loanlens.feedback import EventLog


@pytest.fixture()
def service(pipeline, tmp_path):
    app = create_app(pipeline["model"], pipeline["test"], tmp_path / "logs")
    client = TestClient(app)
    return {"app": app, "client": client, "log_dir": tmp_path / "logs",
            "model": pipeline["model"], "test": pipeline["test"]}


def new_session(client, country="United Kingdom", pre_rating=4):
    r = client.post("/sessions", json={"country": country, "pre_rating": pre_rating})
    assert r.status_code == 200
    return r.json()["session_id"]


class TestSessionsAndOverview:
    def test_overview_counts_equal_test_set_size(self, service):
        client = service["client"]
        token = new_session(client)
        r = client.get("/overview", headers={"X-Session-Token": token})
        counts = r.json()
        assert counts["accepted"] + counts["rejected"] == 300
        assert counts["judged_fair"] == 0
        assert counts["judged_unfair"] == 0

    def test_judgment_read_your_writes(self, service):
        client = service["client"]
        token = new_session(client)
        h = {"X-Session-Token": token}
        app_id = service["test"].applications[0].id
        r = client.post(f"/applications/{app_id}/judgment",
                        json={"verdict": "fair"}, headers=h)
        assert r.status_code == 200
        assert r.json()["overview"]["judged_fair"] == 1
        assert client.get("/overview", headers=h).json()["judged_fair"] == 1

    def test_remark_replaces(self, service):
        client = service["client"]
        token = new_session(client)
        h = {"X-Session-Token": token}
        app_id = service["test"].applications[0].id
        client.post(f"/applications/{app_id}/judgment", json={"verdict": "fair"}, headers=h)
        client.post(f"/applications/{app_id}/judgment", json={"verdict": "unfair"}, headers=h)
        counts = client.get("/overview", headers=h).json()
        assert counts["judged_fair"] == 0
        assert counts["judged_unfair"] == 1

    def test_sessions_are_isolated(self, service):
        client = service["client"]
        t1, t2 = new_session(client), new_session(client)
        app_id = service["test"].applications[0].id
        client.post(f"/applications/{app_id}/judgment", json={"verdict": "unfair"},
                    headers={"X-Session-Token": t1})
        counts = client.get("/overview", headers={"X-Session-Token": t2}).json()
        assert counts["judged_unfair"] == 0

    def test_country_resolution_precedence(self, service):
        client = service["client"]
        r = client.post("/sessions", json={
            "registered_birth": "Italy",
            "questionnaire_residence": "Spain",
        })
        assert r.json()["country"] == "Italy"

    def test_ratings_validation(self, service):
        client = service["client"]
        token = new_session(client)
        r = client.post(f"/sessions/{token}/post_rating", json={"rating": 9})
        assert r.status_code == 422
        r = client.post(f"/sessions/{token}/post_rating", json={"rating": 6})
        assert r.status_code == 200
        r = client.post(f"/sessions/{token}/taskload", json={
            "mental": 60, "physical": 5, "temporal": 55, "performance": 40,
            "effort": 70, "frustration": 120,
        })
        assert r.status_code == 422


class TestErrors:
    def test_unknown_session_is_401_with_code(self, service):
        r = service["client"].get("/overview", headers={"X-Session-Token": "nope"})
        assert r.status_code == 401
        assert r.json()["error"]["code"] == "unknown_session"

    def test_unknown_application_is_404(self, service):
        client = service["client"]
        token = new_session(client)
        r = client.get("/applications/NOPE", headers={"X-Session-Token": token})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "not_found"

    def test_out_of_bounds_weight_is_422_naming_field(self, service):
        client = service["client"]
        token = new_session(client)
        app_id = service["test"].applications[0].id
        r = client.post(f"/applications/{app_id}/weights",
                        json={"weights": {"nationality": 999.0}},
                        headers={"X-Session-Token": token})
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "validation_error"
        assert r.json()["error"]["field"] == "nationality"

    def test_bad_filter_is_422(self, service):
        client = service["client"]
        r = client.get("/applications", params={"filter": "nonsense~~3"})
        assert r.status_code == 422

    def test_bad_event_kind_is_422(self, service):
        client = service["client"]
        token = new_session(client)
        r = client.post(f"/sessions/{token}/events",
                        json={"kind": "teleport", "payload": {}})
        assert r.status_code == 422


class TestModelPanel:
    def test_importance_normalized(self, service):
        attrs = service["client"].get("/model").json()["attributes"]
        importances = [a["importance"] for a in attrs]
        assert max(importances) == pytest.approx(1.0)
        assert all(0.0 <= v <= 1.0 for v in importances)

    def test_distributions_sum_to_100(self, service):
        attrs = service["client"].get("/model").json()["attributes"]
        for a in attrs:
            total = sum(
                b["accepted_pct"] + b["rejected_pct"] for b in a["distribution"]["bins"]
            )
            assert total == pytest.approx(100.0, abs=0.01)

    def test_algorithm_text_present(self, service):
        body = service["client"].get("/model").json()
        assert "score" in body["algorithm"]


class TestApplicationEndpoints:
    def test_detail_fields(self, service):
        client = service["client"]
        app_id = service["test"].applications[0].id
        body = client.get(f"/applications/{app_id}").json()
        assert body["id"] == app_id
        assert len(body["attributes"]) == 26
        crit_sum = sum(a["criticality"] for a in body["attributes"])
        assert crit_sum + body["intercept"] == pytest.approx(body["utility"], abs=1e-9)

    def test_similar_range_flags(self, service):
        client = service["client"]
        app_id = service["test"].applications[0].id
        body = client.get(f"/applications/{app_id}/similar",
                          params={"lo": 0.0, "hi": 1.0}).json()
        assert len(body["items"]) == 299
        assert all(item["selectable"] for item in body["items"])
        body = client.get(f"/applications/{app_id}/similar",
                          params={"lo": 1.0, "hi": 1.0}).json()
        assert all(not item["selectable"] for item in body["items"])

    def test_compare_decomposition_matches_mean(self, service):
        client = service["client"]
        a = service["test"].applications[0].id
        b = service["test"].applications[1].id
        body = client.get(f"/applications/{a}/similar/{b}").json()
        mean = sum(x["similarity"] for x in body["attributes"]) / len(body["attributes"])
        assert body["similarity"] == pytest.approx(mean, abs=1e-9)

    def test_fairness_report_reflects_suggestions(self, service):
        client = service["client"]
        token = new_session(client)
        h = {"X-Session-Token": token}
        before = client.get("/reports/fairness",
                            params={"group_attribute": "nationality"}).json()
        assert before["before"] == before["after"]
        # push the nationality weight to zero on every rejected foreign app
        listing = client.get(
            "/applications",
            params={"filter": "nationality=foreign", "page_size": 300},
            headers=h,
        ).json()
        rejected = [i["id"] for i in listing["items"] if i["decision"] == "rejected"]
        for app_id in rejected:
            client.post(f"/applications/{app_id}/weights",
                        json={"weights": {"nationality": 0.0}}, headers=h)
        after = client.get("/reports/fairness",
                           params={"group_attribute": "nationality"}).json()
        assert after["suggestion_count"] == len(rejected)
        assert (after["after"]["disparate_impact"]
                > after["before"]["disparate_impact"])

    def test_default_protected_group_is_lowest_accept_rate(self, service):
        body = service["client"].get(
            "/reports/fairness", params={"group_attribute": "nationality"}
        ).json()
        assert body["protected"] == "foreign"


class TestFilterSortOracle:
    def _oracle(self, service, predicates, sort, order):
        model = service["model"]
        items = []
        for a in service["test"].applications:
            ok = True
            for name, op, value in predicates:
                spec = model.spec(name)
                v = a.value(name)
                if spec.is_categorical:
                    label = spec.categories[int(v)]
                    ok &= (label == value) if op == "=" else (label != value)
                elif op == "range":
                    lo, hi = value
                    ok &= lo <= v <= hi
                else:
                    ok &= {"=": v == float(value), "!=": v != float(value),
                           "<": v < float(value), "<=": v <= float(value),
                           ">": v > float(value), ">=": v >= float(value)}[op]
            if ok:
                from loanlens.model import predict

                p = predict(model, a)
                items.append({"id": a.id, "decision": p.decision,
                              "confidence": p.confidence, "judgment": None})
        keys = {
            "id": lambda i: (i["id"],),
            "decision": lambda i: (i["decision"], i["id"]),
            "confidence": lambda i: (i["confidence"], i["id"]),
            "judgment": lambda i: (2, i["id"]),
        }
        items.sort(key=keys[sort], reverse=(order == "desc"))
        return [i["id"] for i in items]

    def test_fifty_random_queries_match_brute_force(self, service):
        client = service["client"]
        rng = np.random.default_rng(17)
        sorts = ["id", "decision", "confidence", "judgment"]
        candidates = [
            ("nationality", "=", "foreign", "nationality=foreign"),
            ("nationality", "!=", "foreign", "nationality!=foreign"),
            ("insurance", "=", "yes", "insurance=yes"),
            ("age", ">", "40", "age>40"),
            ("age", "<=", "35", "age<=35"),
            ("monthly_income", ">=", "2500", "monthly_income>=2500"),
            ("monthly_income", "range", (1500.0, 4000.0), "monthly_income=1500..4000"),
            ("credit_risk_level", "=", "high", "credit_risk_level=high"),
            ("loan_duration", "<", "120", "loan_duration<120"),
        ]
        for _ in range(50):
            chosen = [candidates[i] for i in
                      rng.choice(len(candidates), size=rng.integers(0, 3), replace=False)]
            sort = sorts[rng.integers(0, len(sorts))]
            order = ("asc", "desc")[rng.integers(0, 2)]
            expression = ",".join(c[3] for c in chosen)
            r = client.get("/applications", params={
                "sort": sort, "order": order, "filter": expression, "page_size": 300,
            })
            assert r.status_code == 200
            got = [i["id"] for i in r.json()["items"]]
            expected = self._oracle(
                service, [(c[0], c[1], c[2]) for c in chosen], sort, order
            )
            assert got == expected, (expression, sort, order)

    def test_pagination(self, service):
        client = service["client"]
        first = client.get("/applications", params={"page": 1, "page_size": 50}).json()
        second = client.get("/applications", params={"page": 2, "page_size": 50}).json()
        assert first["total"] == 300
        assert len(first["items"]) == 50
        assert first["items"][0]["id"] != second["items"][0]["id"]
        assert client.get("/applications", params={"page_size": 500}).status_code == 422


class TestPersistence:
    GETS = [
        ("/overview", {}),
        ("/model", {}),
        ("/applications", {"sort": "confidence", "order": "desc", "page_size": 300}),
        ("/applications", {"filter": "nationality=foreign", "page_size": 100}),
        ("/reports/fairness", {"group_attribute": "nationality"}),
    ]

    def _scripted_session(self, client, apps):
        token = new_session(client, country="Portugal", pre_rating=5)
        h = {"X-Session-Token": token}
        ids = [a.id for a in apps[:6]]
        client.post(f"/sessions/{token}/events", json={"kind": "sort", "payload": {"key": "confidence"}})
        client.post(f"/sessions/{token}/events", json={"kind": "filter", "payload": {"filter": "nationality=foreign"}})
        client.post(f"/sessions/{token}/events", json={"kind": "select_application", "payload": {"application_id": ids[0]}})
        client.post(f"/applications/{ids[0]}/judgment", json={"verdict": "unfair"}, headers=h)
        client.post(f"/applications/{ids[1]}/judgment", json={"verdict": "fair"}, headers=h)
        client.post(f"/applications/{ids[1]}/judgment", json={"verdict": "cleared"}, headers=h)
        client.post(f"/applications/{ids[2]}/judgment", json={"verdict": "fair", "needs_human": True}, headers=h)
        client.post(f"/applications/{ids[0]}/weights", json={"weights": {"nationality": 0.0}}, headers=h)
        client.post(f"/applications/{ids[3]}/weights", json={"weights": {"nationality": -0.2, "age": 0.1}}, headers=h)
        client.post(f"/applications/{ids[3]}/weights", json={"weights": {"nationality": -0.1}}, headers=h)
        client.post(f"/sessions/{token}/events", json={"kind": "compare", "payload": {"a": ids[0], "b": ids[4]}})
        client.post(f"/sessions/{token}/post_rating", json={"rating": 3})
        client.post(f"/sessions/{token}/taskload", json={
            "mental": 60, "physical": 10, "temporal": 50,
            "performance": 40, "effort": 70, "frustration": 30,
        })
        for i in range(6):
            client.post(f"/sessions/{token}/events",
                        json={"kind": "select_application", "payload": {"application_id": ids[i % 6]}})
        return token

    def test_replay_yields_byte_identical_responses(self, pipeline, tmp_path):
        log_dir = tmp_path / "logs"
        app1 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client1 = TestClient(app1)
        token = self._scripted_session(client1, pipeline["test"].applications)
        h = {"X-Session-Token": token}
        detail_url = f"/applications/{pipeline['test'].applications[0].id}"
        urls = self.GETS + [(detail_url, {}), (detail_url + "/similar", {"lo": 0.3, "hi": 0.9})]
        before = [
            client1.get(url, params=params, headers=h).content
            for url, params in urls
        ]
        # restart: a fresh app over the same log directory
        app2 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client2 = TestClient(app2)
        after = [
            client2.get(url, params=params, headers=h).content
            for url, params in urls
        ]
        assert before == after

    def test_crash_truncation_restores_prefix_state(self, pipeline, tmp_path):
        log_dir = tmp_path / "logs"
        app1 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client1 = TestClient(app1)
        token = new_session(client1)
        h = {"X-Session-Token": token}
        ids = [a.id for a in pipeline["test"].applications[:4]]
        client1.post(f"/applications/{ids[0]}/judgment", json={"verdict": "fair"}, headers=h)
        # snapshot the log after N events, then keep mutating
        log_path = log_dir / "events.ndjson"
        snapshot = tmp_path / "crash.ndjson"
        shutil.copy(log_path, snapshot)
        pre_crash = replay_state(EventLog(snapshot)).snapshot()
        client1.post(f"/applications/{ids[1]}/judgment", json={"verdict": "unfair"}, headers=h)
        restored = replay_state(EventLog(snapshot)).snapshot()
        assert restored == pre_crash

    def test_empty_log_dir_fresh_state(self, pipeline, tmp_path):
        app = create_app(pipeline["model"], pipeline["test"], tmp_path / "fresh")
        counts = app.state.store
        assert counts.sessions == {}
        assert counts.judgments == []

    def test_replay_twice_idempotent(self, pipeline, tmp_path):
        log_dir = tmp_path / "logs"
        app1 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client1 = TestClient(app1)
        self._scripted_session(client1, pipeline["test"].applications)
        log = EventLog(log_dir / "events.ndjson")
        assert replay_state(log).snapshot() == replay_state(log).snapshot()

    def test_corrupt_log_halts_with_line_number(self, pipeline, tmp_path):
        log_dir = tmp_path / "logs"
        app1 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client1 = TestClient(app1)
        new_session(client1)
        log_path = log_dir / "events.ndjson"
        with open(log_path, "a") as fh:
            fh.write("garbage{{{\n")
        with pytest.raises(CorruptLogError) as err:
            create_app(pipeline["model"], pipeline["test"], log_dir)
        assert err.value.line_number == 2
        assert len(err.value.events) == 1  # state before the corruption survives

    def test_timestamps_nondecreasing_per_session(self, pipeline, tmp_path):
        log_dir = tmp_path / "logs"
        app1 = create_app(pipeline["model"], pipeline["test"], log_dir)
        client1 = TestClient(app1)
        self._scripted_session(client1, pipeline["test"].applications)
        events = EventLog(log_dir / "events.ndjson").replay()
        last: dict[str, float] = {}
        for e in events:
            sid = e["session_id"]
            assert e["timestamp"] >= last.get(sid, 0.0)
            last[sid] = e["timestamp"]


class TestConcurrency:
    def test_read_your_writes_under_ten_concurrent_sessions(self, service):
        client = service["client"]
        apps = [a.id for a in service["test"].applications[:30]]

        def worker(k: int) -> bool:
            token = new_session(client, country="Japan")
            h = {"X-Session-Token": token}
            my_apps = apps[3 * k : 3 * k + 3]
            for i, app_id in enumerate(my_apps):
                verdict = "fair" if i % 2 == 0 else "unfair"
                r = client.post(f"/applications/{app_id}/judgment",
                                json={"verdict": verdict}, headers=h)
                if r.status_code != 200:
                    return False
            counts = client.get("/overview", headers=h).json()
            return counts["judged_fair"] == 2 and counts["judged_unfair"] == 1

        with concurrent.futures.ThreadPoolExecutor(max_workers=10) as pool:
            results = list(pool.map(worker, range(10)))
        assert all(results)


class TestOpenApiDescription:
    def test_committed_description_matches_app(self, service):
        committed = json.loads(open("api/openapi.json", encoding="utf-8").read())
        assert committed == service["app"].openapi()
