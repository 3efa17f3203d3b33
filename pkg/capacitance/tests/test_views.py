import io

import pandas as pd
import pytest
from django.urls import reverse

from capacitance.constants import CONVERGENCE_CSV_HEADER
from capacitance.experiments import RunConfig, record_run, run_scenario

pytestmark = pytest.mark.django_db


def plate_document(n=2, **extra):
    panels = [
        {"normal": "z", "offset": 0.0, "u": [0, 1], "v": [0, 1], "nu": n, "nv": n, "conductor": 0, "voltage": 1.0},
        {"normal": "z", "offset": 0.1, "u": [0, 1], "v": [0, 1], "nu": n, "nv": n, "conductor": 1, "voltage": -1.0},
    ]
    return {"panels": panels, **extra}


@pytest.fixture
def recorded_run():
    config = RunConfig("cube", n_values=(1, 2), tiers="point,quad")
    return record_run(config, run_scenario(config))


def test_api_solve(client):
    resp = client.post(reverse("capacitance:api_solve"), plate_document(), content_type="application/json")
    assert resp.status_code == 200
    payload = resp.json()
    assert payload["ok"]
    assert payload["summary"]["tiles"] == 8
    assert payload["summary"]["tier"] == "quad"
    assert payload["summary"]["capacitance_F"] > 0
    assert len(payload["charges"]) == 8


def test_api_solve_accepts_tier(client):
    resp = client.post(reverse("capacitance:api_solve"), plate_document(tier="double"),
                       content_type="application/json")
    assert resp.json()["summary"]["factorization"] == "lu"


@pytest.mark.parametrize("body", [
    "not json",
    "[1, 2]",
    '{"panels": []}',
    '{"panels": [{"normal": "q"}]}',
])
def test_api_solve_rejects_bad_geometry(client, body):
    resp = client.post(reverse("capacitance:api_solve"), body, content_type="application/json")
    assert resp.status_code == 400
    assert resp.json()["ok"] is False


def test_api_solve_rejects_unknown_tier(client):
    resp = client.post(reverse("capacitance:api_solve"), plate_document(tier="exact"),
                       content_type="application/json")
    assert resp.status_code == 400
    assert "tier" in resp.json()["error"]


def test_api_solve_rejects_three_conductors(client):
    document = plate_document(n=1)
    document["panels"].append(
        {"normal": "z", "offset": 0.2, "u": [0, 1], "v": [0, 1], "nu": 1, "nv": 1, "conductor": 2, "voltage": 0.0},
    )
    resp = client.post(reverse("capacitance:api_solve"), document, content_type="application/json")
    assert resp.status_code == 400
    assert resp.json()["ok"] is False
    assert "3 conductors" in resp.json()["error"]


def test_api_solve_requires_post(client):
    assert client.get(reverse("capacitance:api_solve")).status_code == 405


def test_run_list_and_detail(client, recorded_run):
    listing = client.get(reverse("capacitance:run_list")).json()
    assert [r["id"] for r in listing["runs"]] == [recorded_run.pk]
    assert "summary" not in listing["runs"][0]

    detail = client.get(reverse("capacitance:run_detail", args=[recorded_run.pk])).json()
    assert detail["run"]["tiers"] == ["point", "quad"]
    assert len(detail["run"]["points"]) == 4
    assert detail["run"]["summary"]["reference_4pie0"] == pytest.approx(0.660678)


def test_run_detail_missing(client):
    assert client.get(reverse("capacitance:run_detail", args=[999])).status_code == 404


def test_run_csv(client, recorded_run):
    resp = client.get(reverse("capacitance:run_csv", args=[recorded_run.pk, "quad"]))
    assert resp.status_code == 200
    assert resp["Content-Type"] == "text/csv"
    frame = pd.read_csv(io.StringIO(resp.content.decode()))
    assert list(frame.columns) == CONVERGENCE_CSV_HEADER
    assert list(frame["n"]) == [1, 2]


def test_run_csv_without_points(client, recorded_run):
    resp = client.get(reverse("capacitance:run_csv", args=[recorded_run.pk, "double"]))
    assert resp.status_code == 404
    assert resp.json()["ok"] is False


def test_run_pdf(client, recorded_run):
    resp = client.get(reverse("capacitance:run_pdf", args=[recorded_run.pk]))
    assert resp.status_code == 200
    assert resp["Content-Type"] == "application/pdf"
    assert resp.content.startswith(b"%PDF")


def test_root_redirects_to_runs(client):
    resp = client.get("/")
    assert resp.status_code == 302
    assert resp["Location"] == "/capacitance/runs/"
