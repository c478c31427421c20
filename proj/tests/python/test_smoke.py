import json
import pathlib

import pytest

import mindcheck

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
CHAT_SCRIPT = FIXTURES / "chat_script.json"


def chat_lines():
    return (FIXTURES / "chat_input.txt").read_text().splitlines()


def run_chat():
    s = mindcheck.Session("demo", ["sleep-schedule", "managing-mood"], CHAT_SCRIPT, seed=5)
    for line in chat_lines():
        if s.phase == "done":
            break
        s.send(line)
    return s


def test_catalog_has_37_dimensions():
    cat = mindcheck.catalog()
    assert len(cat["dimensions"]) == 37
    assert len({d["slug"] for d in cat["dimensions"]}) == 37


def test_turn_kinds_are_listed():
    kinds = mindcheck.turn_kinds()
    assert "question" in kinds
    assert len(kinds) == len(set(kinds)) == 10


def test_grammar_and_segmentation():
    assert mindcheck.parse_decision("Decision: 1") == 1
    with pytest.raises(mindcheck.ParseError):
        mindcheck.parse_decision("maybe")
    assert mindcheck.segment("I slept late. Then I ate.") == ["I slept late.", "Then I ate."]


def test_scripted_session_runs_to_done():
    s = run_chat()
    assert s.phase == "done"
    report = s.report()
    assert report["text"].startswith("Session report")
    slugs = [row["dimension"] for row in report["data"]["scores"]]
    assert sorted(slugs) == ["managing-mood", "sleep-schedule"]
    assert s.frames()[0]["kind"] == "question"


def test_record_replays_to_the_same_report():
    s = run_chat()
    record = s.record()
    assert mindcheck.replay(record, CHAT_SCRIPT)["text"] == s.report()["text"]


def test_eval_fixture_accuracy():
    result = mindcheck.evaluate("rv_reasoner", FIXTURES / "eval_rv_20.jsonl", FIXTURES / "eval_rv_20_script.json")
    assert result["metrics"]["accuracy"] == pytest.approx(0.75, abs=1e-12)


def test_eval_echo_backend_is_perfect():
    result = mindcheck.evaluate("rv_reasoner", FIXTURES / "eval_rv_20.jsonl", parallelism=4)
    assert result["metrics"]["accuracy"] == pytest.approx(1.0, abs=1e-12)


def test_api_session_flow():
    api = mindcheck.Api(CHAT_SCRIPT, auth_secret="k")
    token = mindcheck.user_token("k", "demo")
    status, body = api.request("POST", "/sessions", {"user_id": "demo", "selected_dimensions": ["sleep-schedule"], "seed": 1})
    assert status == 401
    status, body = api.request(
        "POST", "/sessions", {"user_id": "demo", "selected_dimensions": ["sleep-schedule"], "seed": 1}, token=token
    )
    assert status == 201
    sid = body["session_id"]
    status, body = api.request("GET", f"/sessions/{sid}/report", token=token)
    assert status == 409
    status, body = api.request("GET", "/health")
    assert status == 200
    assert json.dumps(body)
