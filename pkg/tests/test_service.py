"""HTTP verification API and the guarded retry loop around it."""

from __future__ import annotations

import io

import pytest
from fastapi.testclient import TestClient
from PIL import Image

import failforge
from failforge.errors import ExecutorError, GatewayError, GatewayTimeoutError
from failforge.protocol import Verdict
from failforge.service import (
    GuardedOutcome,
    RetryPolicy,
    ServiceSettings,
    create_app,
    retry_target_for,
    run_guarded_step,
)
from failforge.service.backend import ScriptedBackend
from failforge.taxonomy import Kind
from failforge.testing import StubServer, scripted_trace

import base64


def _b64(color=(200, 40, 40), size=(16, 16)) -> str:
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _payload(camera=None, color=(200, 40, 40)):
    body = {"b64": _b64(color)}
    if camera:
        body["camera_id"] = camera
    return body


def _plan_body(**overrides):
    body = {
        "task_instruction": "put the spoon on the towel",
        "plan": ["pick up the spoon", "put the spoon on the towel"],
        "images": [_payload("front")],
    }
    body.update(overrides)
    return body


def _exec_body(**overrides):
    body = {
        "task_instruction": "put the spoon on the towel",
        "subtask_instruction": "pick up the spoon",
        "start_images": [_payload("front"), _payload("wrist")],
        "end_images": [_payload("front", (40, 200, 40)), _payload("wrist", (40, 200, 40))],
    }
    body.update(overrides)
    return body


class RecordingBackend(ScriptedBackend):
    def __init__(self, fn):
        super().__init__(fn)
        self.queries = []

    def complete(self, query):
        self.queries.append(query)
        return super().complete(query)


def client_with(reply):
    fn = reply if callable(reply) else (lambda q: reply)
    backend = RecordingBackend(fn)
    return TestClient(create_app(backend=backend), raise_server_exceptions=False), backend


# -- verify endpoints --------------------------------------------------------


def test_plan_failure_suggests_replan():
    client, backend = client_with(scripted_trace("ANSWER: failure | CATEGORY: wrong_order"))
    resp = client.post("/v1/verify/plan", json=_plan_body())
    assert resp.status_code == 200
    body = resp.json()
    assert body["success"] is False
    assert body["category"] == "wrong_order"
    assert body["retry_target"] == "replan"
    assert body["latency_ms"] > 0
    assert "ANSWER" not in body["reasoning"]

    query = backend.queries[0]
    assert query.kind is Kind.PLAN
    assert "1. pick up the spoon" in query.text_prompt
    assert query.image_parts[0].label == "initial view 1 (front)"


def test_plan_success_has_no_retry_target():
    client, _ = client_with("ANSWER: success")
    body = client.post("/v1/verify/plan", json=_plan_body()).json()
    assert body["success"] is True
    assert body["category"] == "success"
    assert body["retry_target"] is None


def test_execution_failure_suggests_reexecute():
    client, backend = client_with(scripted_trace("ANSWER: failure | CATEGORY: no_gripper_close"))
    resp = client.post("/v1/verify/execution", json=_exec_body())
    assert resp.status_code == 200
    assert resp.json()["retry_target"] == "reexecute"
    labels = [p.label for p in backend.queries[0].image_parts]
    assert labels == [
        "start view 1 (front)",
        "start view 2 (wrist)",
        "end view 1 (front)",
        "end view 2 (wrist)",
    ]


def test_execution_grid_mode_composes_one_image():
    client, backend = client_with("ANSWER: success")
    body = _exec_body(options={"image_mode": "grid", "answer_mode": "direct"})
    assert client.post("/v1/verify/execution", json=body).status_code == 200
    parts = backend.queries[0].image_parts
    assert len(parts) == 1
    assert parts[0].label == "grid of 2 views x start/end"
    assert parts[0].decode().size == (32, 32)  # 2 timesteps wide, 2 views tall
    assert backend.queries[0].answer_mode == "direct"


def test_mismatched_view_counts_rejected():
    client, _ = client_with("ANSWER: success")
    body = _exec_body(end_images=[_payload("front")])
    resp = client.post("/v1/verify/execution", json=body)
    assert resp.status_code == 400
    assert "start/end view counts differ" in str(resp.json()["detail"])


@pytest.mark.parametrize(
    "body",
    [
        _plan_body(plan=[]),
        _plan_body(images=[]),
        _plan_body(images=[{"b64": ""}]),
        {"plan": ["x"], "images": [_payload()]},  # task_instruction missing
    ],
)
def test_invalid_plan_requests_rejected(body):
    client, _ = client_with("ANSWER: success")
    assert client.post("/v1/verify/plan", json=body).status_code == 400


def test_unparseable_reply_is_bad_gateway():
    raw = "the scene is ambiguous, hard to tell"
    client, _ = client_with(raw)
    resp = client.post("/v1/verify/plan", json=_plan_body())
    assert resp.status_code == 502
    assert resp.json()["raw_text"] == raw


def test_off_menu_category_is_bad_gateway():
    # no_gripper_close is an execution category; the plan endpoint must not accept it
    client, _ = client_with(scripted_trace("ANSWER: failure | CATEGORY: no_gripper_close"))
    resp = client.post("/v1/verify/plan", json=_plan_body())
    assert resp.status_code == 502
    assert "no_gripper_close" in resp.json()["raw_text"]


def test_backend_timeout_maps_to_504():
    def boom(query):
        raise GatewayTimeoutError("4 attempts timed out", attempts=4)

    client, _ = client_with(boom)
    resp = client.post("/v1/verify/plan", json=_plan_body())
    assert resp.status_code == 504
    assert "timed out" in resp.json()["detail"]


def test_backend_failure_maps_to_502():
    def boom(query):
        raise GatewayError("endpoint returned 500 after 4 attempts", status=500, attempts=4)

    client, _ = client_with(boom)
    resp = client.post("/v1/verify/execution", json=_exec_body())
    assert resp.status_code == 502


def test_healthz_reports_backend_and_templates():
    client, _ = client_with("ANSWER: success")
    body = client.get("/healthz").json()
    assert body["ok"] is True
    assert body["version"] == failforge.__version__
    assert body["backend"] == "scripted"
    plan_id, exec_id = body["template_id"].split(",")
    assert plan_id.startswith("detect_plan_v1:")
    assert exec_id.startswith("detect_exec_v1:")


def test_service_over_live_gateway(tmp_path):
    with StubServer() as stub:
        settings = ServiceSettings(backend_url=stub.base_url, cache_dir=str(tmp_path))
        client = TestClient(create_app(settings))
        body = _plan_body(task_instruction="tidy up [[verdict:failure:missing_subtask]]")
        resp = client.post("/v1/verify/plan", json=body)
        assert resp.status_code == 200
        assert resp.json()["category"] == "missing_subtask"
        assert resp.json()["retry_target"] == "replan"
        health = client.get("/healthz").json()
        assert health["ok"] is True
        assert health["backend"] == "reachable"


# -- guarded retry loop --------------------------------------------------------


def _ok():
    return Verdict(success=True, category="success")


def _fail():
    return Verdict(success=False, category="no_progress")


def scripted_verifier(script):
    verdicts = iter(script)
    return lambda result: next(verdicts)


def test_guarded_step_stops_on_first_success():
    calls = []
    outcome = run_guarded_step(lambda: calls.append(1), scripted_verifier([_ok()]))
    assert isinstance(outcome, GuardedOutcome)
    assert outcome.attempts == 1
    assert len(calls) == 1
    assert outcome.final_verdict.success


def test_guarded_step_retries_until_success():
    calls = []
    outcome = run_guarded_step(
        lambda: calls.append(1), scripted_verifier([_fail(), _fail(), _ok()])
    )
    assert outcome.attempts == 3
    assert len(calls) == 3
    assert [v.success for _, v in outcome.attempt_log] == [False, False, True]
    assert [a for a, _ in outcome.attempt_log] == [1, 2, 3]


def test_guarded_step_exhausts_budget():
    outcome = run_guarded_step(
        lambda: None, scripted_verifier([_fail()] * 4), RetryPolicy(max_retries=3)
    )
    assert outcome.attempts == 4
    assert not outcome.final_verdict.success
    assert outcome.final_verdict.category == "no_progress"


def test_guarded_step_zero_retries():
    outcome = run_guarded_step(
        lambda: None, scripted_verifier([_fail()]), RetryPolicy(max_retries=0)
    )
    assert outcome.attempts == 1


def test_executor_crash_carries_partial_log():
    hits = iter([None, RuntimeError("gripper jammed")])

    def executor():
        step = next(hits)
        if isinstance(step, Exception):
            raise step

    with pytest.raises(ExecutorError) as exc_info:
        run_guarded_step(executor, scripted_verifier([_fail(), _fail()]))
    err = exc_info.value
    assert "attempt 2" in str(err)
    assert len(err.attempt_log) == 1
    assert isinstance(err.cause, RuntimeError)


def test_retry_policy_validation():
    with pytest.raises(ValueError):
        RetryPolicy(max_retries=-1)
    with pytest.raises(ValueError):
        RetryPolicy(retry_target="panic")
    assert RetryPolicy().max_retries == 3
    assert RetryPolicy().retry_target == "reexecute"


def test_retry_target_per_kind():
    assert retry_target_for(Kind.PLAN) == "replan"
    assert retry_target_for("plan") == "replan"
    assert retry_target_for(Kind.EXECUTION) == "reexecute"
    assert retry_target_for("execution") == "reexecute"
