# tests/test_routes.py — beeplab
# ══════════════════════════════════════════════════════════════
# Flask Route Tests
# Every route answers with JSON and never crashes on bad input
# ══════════════════════════════════════════════════════════════
import dataclasses

import pytest


# ══════════════════════════════════════════════════════════════
# GET routes
# ══════════════════════════════════════════════════════════════
class TestGetRoutes:

    GET_ROUTES_200 = [
        "/ping",
        "/healthz",
        "/api/protocols",
        "/programs/parity.cm",
        "/programs/compare.cm",
        "/programs/threshold.cm",
    ]

    @pytest.mark.parametrize("route", GET_ROUTES_200)
    @pytest.mark.smoke
    def test_get_route_returns_200(self, client, route):
        response = client.get(route)
        assert response.status_code == 200, (
            f"Route {route} returned {response.status_code} instead of 200"
        )

    def test_unknown_route_returns_404(self, client):
        response = client.get("/nope")
        assert response.status_code == 404
        assert "error" in response.get_json()

    def test_unknown_program_returns_404(self, client):
        assert client.get("/programs/fibonacci.cm").status_code == 404

    def test_healthz_payload(self, client):
        data = client.get("/healthz").get_json()
        assert data["status"] == "ok"
        assert data["version"]

    def test_protocols_payload(self, client):
        data = client.get("/api/protocols").get_json()
        assert set(data["protocols"]) == {"state-optimal", "fixed-error", "constant-state", "double-safe"}
        assert data["defaults"]["epsilon"] == "1/10"
        assert "parity" in data["programs"]

    def test_program_source_is_text(self, client):
        response = client.get("/programs/parity.cm")
        assert response.mimetype == "text/plain"
        assert b"ACCEPT" in response.data

    def test_security_headers(self, client):
        response = client.get("/ping")
        assert response.headers["X-Content-Type-Options"] == "nosniff"
        assert response.headers["X-Frame-Options"] == "DENY"


# ══════════════════════════════════════════════════════════════
# Election and loneliness
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestExperimentRoutes:

    def test_elect(self, client):
        response = client.post("/api/elect", json={
            "algo": "fixed-error", "n": [1, 2], "epsilon": "1/10", "trials": 10, "seed": 1})
        assert response.status_code == 200
        data = response.get_json()
        assert [row["n"] for row in data["rows"]] == [1, 2]
        assert data["histograms"]["1"] == {"1": 10}
        assert data["csv"].startswith("protocol,n,epsilon")
        assert data["trials_capped"] is False

    def test_lonely(self, client):
        response = client.post("/api/lonely", json={"n": 1, "trials": 5, "epsilon": "1/20"})
        assert response.status_code == 200
        assert response.get_json()["histograms"]["1"] == {"1": 5}

    def test_hyphenated_keys(self, client):
        response = client.post("/api/elect", json={
            "n": 1, "trials": 2, "n-lower-bound": 1, "count-bound": 4, "algo": "double-safe"})
        assert response.status_code == 200

    def test_trials_capped(self, client, monkeypatch):
        import app as app_module
        monkeypatch.setattr(app_module, "SETTINGS",
                            dataclasses.replace(app_module.SETTINGS, api_max_trials=3))
        data = client.post("/api/elect", json={"n": 1, "trials": 500}).get_json()
        assert data["trials_capped"] is True
        assert data["rows"][0]["trials"] == 3

    @pytest.mark.parametrize("body", [
        {"epsilon": "2"},
        {"epsilon": "banana"},
        {"algo": "psychic"},
        {"trials": "many"},
        {"n": "0"},
    ])
    def test_bad_parameters_return_400(self, client, body):
        response = client.post("/api/elect", json=body)
        assert response.status_code == 400
        assert "error" in response.get_json()

    def test_non_json_returns_415(self, client):
        response = client.post("/api/elect", data="n=2", content_type="text/plain")
        assert response.status_code == 415

    def test_json_array_returns_400(self, client):
        assert client.post("/api/elect", json=[1, 2]).status_code == 400

    def test_get_not_allowed(self, client):
        assert client.get("/api/elect").status_code == 405


# ══════════════════════════════════════════════════════════════
# Audit and exact analysis
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestAnalysisRoutes:

    def test_audit(self, client):
        data = client.post("/api/audit", json={"algo": "fixed-error", "epsilon": "1/8"}).get_json()
        assert data["protocol"] == "universal+fixed-error"
        assert data["states"] > 0
        assert data["lower_bound"] == pytest.approx(3.0)
        assert data["params"]["q_hat"] == 2

    def test_audit_lonely(self, client):
        plain = client.post("/api/audit", json={"epsilon": "1/8"}).get_json()["states"]
        lonely = client.post("/api/audit", json={"epsilon": "1/8", "task": "lonely"}).get_json()["states"]
        assert lonely >= plain

    def test_analyze_single_node(self, client):
        data = client.post("/api/analyze", json={"algo": "fixed-error", "n": 1}).get_json()
        assert data["violation"]["exact"] == "0/1"
        assert data["profiles"] == [{"labels": {"leader": 1}, "exact": "1/1", "float": 1.0}]
        assert data["machine"]["states"] > 0

    def test_analyze_needs_single_n(self, client):
        response = client.post("/api/analyze", json={"n": [1, 2]})
        assert response.status_code == 400


# ══════════════════════════════════════════════════════════════
# Counter machines
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestCounterRoute:

    def test_shipped_program(self, client):
        response = client.post("/api/counter", json={
            "program": "threshold", "n": 3, "init": "c1=3", "trials": 2})
        assert response.status_code == 200
        data = response.get_json()
        assert data["program"] == "threshold"
        assert data["rows"][0]["oracle"] == "accept"
        assert data["epsilon"] == "1/20"

    def test_inline_source(self, client, inc_then_test_source):
        response = client.post("/api/counter", json={
            "source": inc_then_test_source, "name": "bump", "n": 2, "trials": 1})
        assert response.status_code == 200
        assert response.get_json()["rows"][0]["oracle"] == "accept"

    def test_parse_errors_are_listed(self, client):
        response = client.post("/api/counter", json={"source": "INC 9\nFLY\n", "n": 2})
        assert response.status_code == 400
        data = response.get_json()
        assert data["type"] == "CounterProgramError"
        assert [p["line"] for p in data["problems"]] == [1, 2]

    def test_unknown_program(self, client):
        assert client.post("/api/counter", json={"program": "fibonacci"}).status_code == 400
