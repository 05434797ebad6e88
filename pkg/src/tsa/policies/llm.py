"""External chat-completion controller with a scripted mock.

Observations are rendered into ``PROMPT_TEMPLATE``; the completion must
contain a JSON action list.  A malformed or failed completion is retried
once, then every junction in the batch falls back to MaxPressure and one
incident is logged for the epoch.
"""

from __future__ import annotations

import json
import logging
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from tsa.contract import JunctionObservation, SignalAction
from tsa.errors import EndpointUnreachable
from tsa.policies.signal import _action_for, _greens, max_pressure_decide

log = logging.getLogger(__name__)

SYSTEM_PROMPT = "You are a traffic signal controller. Answer with JSON only."

PROMPT_TEMPLATE = """Step {step}. Signalized junctions, in order:
{observations}

For each junction choose the green phase to run next, favouring phases whose
movements have long queues upstream and short queues downstream.
Reply with a JSON list aligned with the junction order above:
[{{"junction": "<id>", "phase": <index>}}, ...]
"""


@dataclass
class LlmEndpoint:
    url: str
    key: str | None = None
    model: str = "default"
    timeout: float = 10.0

    @classmethod
    def from_env(cls) -> "LlmEndpoint | None":
        url = os.environ.get("TSA_LLM_ENDPOINT")
        if not url:
            return None
        return cls(url, os.environ.get("TSA_LLM_KEY"), os.environ.get("TSA_LLM_MODEL", "default"))


@dataclass
class MockTranscript:
    """Replays scripted completions in order; the last one repeats once exhausted."""

    responses: list[str] = field(default_factory=list)
    cursor: int = 0
    prompts: list[str] = field(default_factory=list)

    @classmethod
    def load(cls, path: str) -> "MockTranscript":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        items = data["responses"] if isinstance(data, dict) else data
        return cls([r if isinstance(r, str) else json.dumps(r) for r in items])

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if not self.responses:
            raise EndpointUnreachable("mock transcript is empty")
        text = self.responses[min(self.cursor, len(self.responses) - 1)]
        self.cursor += 1
        return text


def observation_payload(obs: JunctionObservation) -> dict:
    return {
        "junction": obs.junction_id,
        "active_phase": obs.active_phase,
        "elapsed_in_phase": obs.elapsed_in_phase,
        "green_phases": list(obs.green_phases),
        "pressure_per_phase": {str(k): v for k, v in sorted(obs.pressure_per_phase.items())},
        "total_queue": obs.total_queue,
        "neighbor_total_queue": obs.neighbor_total_queue,
        "approaching": len(obs.approaching),
        "regional_density": round(obs.regional_density, 3),
    }


def build_prompt(batch: list[JunctionObservation]) -> str:
    lines = [json.dumps(observation_payload(o), sort_keys=True) for o in batch]
    step = batch[0].step if batch else 0
    return PROMPT_TEMPLATE.format(step=step, observations="\n".join(lines))


def post_chat(endpoint: LlmEndpoint, prompt: str) -> str:  # pragma: no cover - network
    body = json.dumps({"model": endpoint.model, "messages": [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": prompt}]}).encode()
    headers = {"Content-Type": "application/json"}
    if endpoint.key:
        headers["Authorization"] = f"Bearer {endpoint.key}"
    req = urllib.request.Request(endpoint.url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=endpoint.timeout) as resp:
            payload = json.loads(resp.read().decode())
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise EndpointUnreachable(f"{endpoint.url}: {exc}") from exc
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise EndpointUnreachable(f"unexpected completion payload: {exc}") from exc


_JSON_START = re.compile(r"[\[{]")


def _extract_json(text: str):
    text = re.sub(r"```(?:json)?", "", text)
    m = _JSON_START.search(text)
    if m is None:
        raise ValueError("no JSON in completion")
    value, _ = json.JSONDecoder().raw_decode(text[m.start():])
    return value


def parse_actions(text: str, batch: list[JunctionObservation]) -> list[SignalAction]:
    """Constrained parse: one valid green phase per junction, aligned to ``batch``."""
    value = _extract_json(text)
    if isinstance(value, dict) and "actions" in value:
        value = value["actions"]
    if isinstance(value, dict):
        value = [value]
    if not isinstance(value, list) or len(value) != len(batch):
        raise ValueError(f"expected {len(batch)} actions")
    by_id = {}
    for pos, item in enumerate(value):
        if not isinstance(item, dict) or not isinstance(item.get("phase"), int) \
                or isinstance(item.get("phase"), bool):
            raise ValueError(f"action {pos} lacks an integer phase")
        by_id[item.get("junction", batch[pos].junction_id)] = item["phase"]
    out = []
    for obs in batch:
        if obs.junction_id not in by_id:
            raise ValueError(f"no action for junction {obs.junction_id}")
        phase = by_id[obs.junction_id]
        if phase not in _greens(obs):
            raise ValueError(f"phase {phase} is not a green phase of {obs.junction_id}")
        out.append(_action_for(obs, phase))
    return out


def llm_decide(batch: list[JunctionObservation], endpoint: LlmEndpoint | None = None,
               mock: MockTranscript | None = None, retries: int = 1,
               incidents: list[str] | None = None, post=post_chat) -> list[SignalAction]:
    """Ask the model for one action per junction; never raises on model failure."""
    batch = sorted(batch, key=lambda o: o.junction_id)
    if not batch:
        return []
    prompt = build_prompt(batch)
    last: Exception | None = None
    for _ in range(1 + retries):
        try:
            if mock is not None:
                text = mock.complete(prompt)
            elif endpoint is not None:
                text = post(endpoint, prompt)
            else:
                raise EndpointUnreachable("no endpoint configured")
            return parse_actions(text, batch)
        except (EndpointUnreachable, ValueError) as exc:
            last = exc
    msg = f"step {batch[0].step}: {type(last).__name__}: {last}; falling back to max_pressure"
    log.warning(msg)
    if incidents is not None:
        incidents.append(msg)
    return [max_pressure_decide(o) for o in batch]
