"""Task understanding: instruction text to a validated TaskSpec."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from tsa.demand import TIME_WINDOWS, ProfileSpec
from tsa.demand.departures import curve_for_window
from tsa.engine.config import SCENARIOS
from tsa.errors import InvalidSpec, TsaError, UnintelligibleInstruction
from tsa.netmodel import load_gazetteer
from tsa.policies.llm import LlmEndpoint, MockTranscript, post_chat
from tsa.policies.selection import ALGORITHMS, explicit_algorithm

DEFAULT_REGION = "Yizhuang"
DEFAULT_WINDOW = "morning_peak"
DEFAULT_PERSONS = 500

# scenario keywords, checked in this order
_SCENARIO_WORDS = [
    ("fusion", re.compile(r"\bfusion\b", re.I)),
    ("medical_service", re.compile(r"\bmedical\b|\bhospitals?\b|\bambulance", re.I)),
    ("tsc", re.compile(r"\btsc\b|\bsignals?\b|traffic lights?", re.I)),
    ("auto_drive", re.compile(r"\bauto|\bdriving\b|\bself-driving\b", re.I)),
]
_WINDOW_WORDS = [
    ("morning_peak", re.compile(r"\bmorning(?:[\s-]+peak)?(?:[\s-]+hours?)?", re.I)),
    ("evening_peak", re.compile(r"\bevening(?:[\s-]+peak)?(?:[\s-]+hours?)?", re.I)),
    ("midnight", re.compile(r"\bmidnight\b", re.I)),
    ("all_day", re.compile(r"\b(?:all|whole)[\s-]day\b", re.I)),
]
_COUNT = re.compile(r"(\d[\d,]*)\s*(persons|people|travellers|travelers|vehicles|cars|drivers|trips)\b",
                    re.I)
_OPTIMIZE = re.compile(r"\boptimi[sz]|\bimprove\b", re.I)

# documented skews for ambiguous demographic phrases
FEMALE_DOMINANT = {"female": 0.7, "male": 0.3}
MALE_DOMINANT = {"female": 0.3, "male": 0.7}
MIDDLE_AGED = ((18, 34, 0.15), (35, 55, 0.7), (56, 80, 0.15))
MIDDLE_INCOME = ((1, 3, 0.15), (4, 7, 0.7), (8, 10, 0.15))
MEDIAN_EDUCATION = {"primary": 0.05, "high_school": 0.45, "bachelor": 0.4, "master": 0.08,
                    "doctorate": 0.02}


@dataclass
class TaskSpec:
    scenario_name: str = "tsc"
    regions: list[str] = field(default_factory=list)
    # (label, start_step, duration_step)
    time_windows: list[tuple[str, int, int]] = field(default_factory=list)
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    persons_num: int = DEFAULT_PERSONS
    vehicles_num: int | None = None
    driving_mode: str = "unified"
    objective: str = ""
    algorithm: str | None = None
    comparisons: list[tuple[str, str]] = field(default_factory=list)
    optimize: bool = False
    seed: int = 0

    def window(self, label: str) -> tuple[str, int, int]:
        for w in self.time_windows:
            if w[0] == label:
                return w
        start, dur = TIME_WINDOWS.get(label, (0, 3600))
        return (label, start, dur)

    def validate(self) -> "TaskSpec":
        if self.scenario_name not in SCENARIOS:
            raise InvalidSpec(f"unknown scenario {self.scenario_name!r}")
        if not self.comparisons:
            raise InvalidSpec("at least one (region, window) pair is required")
        if self.persons_num <= 0 or (self.vehicles_num is not None and self.vehicles_num <= 0):
            raise InvalidSpec("counts must be positive")
        if self.algorithm is not None and self.algorithm not in ALGORITHMS:
            raise InvalidSpec(f"unknown algorithm {self.algorithm!r}")
        labels = {w[0] for w in self.time_windows}
        for region, label in self.comparisons:
            if not region:
                raise InvalidSpec("empty region name")
            if label not in labels and label not in TIME_WINDOWS:
                raise InvalidSpec(f"unknown time window {label!r}")
        for label, start, dur in self.time_windows:
            if start < 0 or dur <= 0:
                raise InvalidSpec(f"window {label!r} needs start >= 0 and duration > 0")
        self.profile.validate()
        return self

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "regions": list(self.regions),
            "time_windows": [list(w) for w in self.time_windows],
            "profile": self.profile.to_dict(),
            "persons_num": self.persons_num,
            "vehicles_num": self.vehicles_num,
            "driving_mode": self.driving_mode,
            "objective": self.objective,
            "algorithm": self.algorithm,
            "comparisons": [list(c) for c in self.comparisons],
            "optimize": self.optimize,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        if not isinstance(d, dict):
            raise InvalidSpec("task spec must be an object")
        try:
            spec = cls(
                scenario_name=str(d.get("scenario_name", "tsc")),
                regions=[str(r) for r in d.get("regions", [])],
                time_windows=[(str(w[0]), int(w[1]), int(w[2])) for w in d.get("time_windows", [])],
                profile=ProfileSpec.from_dict(d.get("profile", {})),
                persons_num=int(d.get("persons_num", DEFAULT_PERSONS)),
                vehicles_num=None if d.get("vehicles_num") is None else int(d["vehicles_num"]),
                driving_mode=str(d.get("driving_mode", "unified")),
                objective=str(d.get("objective", "")),
                algorithm=d.get("algorithm"),
                comparisons=[(str(c[0]), str(c[1])) for c in d.get("comparisons", [])],
                optimize=bool(d.get("optimize", False)),
                seed=int(d.get("seed", 0)),
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise InvalidSpec(f"malformed task spec: {exc}") from exc
        if not spec.comparisons and spec.regions:
            label = spec.time_windows[0][0] if spec.time_windows else DEFAULT_WINDOW
            spec.comparisons = [(r, label) for r in spec.regions]
        return spec

    @classmethod
    def from_json(cls, text: str) -> "TaskSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"task spec is not JSON: {exc}") from exc


def _display(name: str) -> str:
    return ", ".join(part.strip().title() for part in name.split(","))


def _find_regions(text: str, gazetteer) -> list[tuple[int, str]]:
    names = sorted(load_gazetteer(gazetteer), key=len, reverse=True)
    taken: list[tuple[int, int]] = []
    found = []
    for name in names:
        for m in re.finditer(rf"(?<!\w){re.escape(name)}(?!\w)", text, re.I):
            if any(m.start() < b and a < m.end() for a, b in taken):
                continue
            taken.append((m.start(), m.end()))
            found.append((m.start(), _display(name)))
    found.sort()
    out, seen = [], set()
    for pos, name in found:
        if name.lower() not in seen:
            seen.add(name.lower())
            out.append((pos, name))
    return out


def _find_windows(text: str) -> list[tuple[int, str]]:
    hits = []
    for label, pat in _WINDOW_WORDS:
        hits.extend((m.start(), label) for m in pat.finditer(text))
    hits.sort()
    return hits


def _profile_for(text: str) -> ProfileSpec:
    low = text.lower()
    base = ProfileSpec()
    gender = base.gender_distribution
    if re.search(r"female[\s-]*(dominat|major)|mostly (women|female)|more (women|female)", low):
        gender = dict(FEMALE_DOMINANT)
    elif re.search(r"(?<!fe)male[\s-]*(dominat|major)|mostly (men|male)|more (men|male)", low):
        gender = dict(MALE_DOMINANT)
    ages = MIDDLE_AGED if re.search(r"middle[\s-]aged", low) else base.age_ranges
    cons = MIDDLE_INCOME if re.search(r"middle[\s-]income", low) else base.cons_ranges
    edu = MEDIAN_EDUCATION if re.search(r"(median|middle|average)[\s-]education", low) \
        else base.education_distribution
    return ProfileSpec(ages, gender, edu, cons)


def _pair(regions: list[str], windows: list[str]) -> list[tuple[str, str]]:
    if len(regions) == 1:
        return [(regions[0], w) for w in windows]
    if len(windows) <= 1:
        w = windows[0] if windows else DEFAULT_WINDOW
        return [(r, w) for r in regions]
    # zip in mention order; surplus regions reuse the last window
    return [(r, windows[min(i, len(windows) - 1)]) for i, r in enumerate(regions)]


def parse_instruction(text: str, gazetteer=None) -> TaskSpec:
    """Deterministic keyword extraction; see ``understand_instruction``."""
    text = (text or "").strip()
    if not text:
        raise UnintelligibleInstruction("empty instruction")
    scenario = next((name for name, pat in _SCENARIO_WORDS if pat.search(text)), None)
    regions = [name for _, name in _find_regions(text, gazetteer)]
    if scenario is None and not regions:
        raise UnintelligibleInstruction(f"no scenario or known region in {text!r}")
    scenario = scenario or "tsc"
    regions = regions or [DEFAULT_REGION]
    windows = []
    for _, label in _find_windows(text):
        if label not in windows or len(regions) > 1:
            windows.append(label)
    if not windows:
        windows = [DEFAULT_WINDOW]
    comparisons = _pair(regions, windows)
    labels = list(dict.fromkeys(w for _, w in comparisons))
    time_windows = []
    for label in labels:
        c = curve_for_window(label)
        time_windows.append((label, c.start_step, c.duration_step))
    persons, vehicles = DEFAULT_PERSONS, None
    for m in _COUNT.finditer(text):
        n = int(m.group(1).replace(",", ""))
        if m.group(2).lower() in ("vehicles", "cars"):
            vehicles = n
        else:
            persons = n
    if vehicles is not None and vehicles > persons:
        persons = vehicles
    return TaskSpec(scenario_name=scenario, regions=regions, time_windows=time_windows,
                    profile=_profile_for(text), persons_num=persons, vehicles_num=vehicles,
                    objective=text, algorithm=explicit_algorithm(text), comparisons=comparisons,
                    optimize=bool(_OPTIMIZE.search(text)))


LLM_PROMPT = """Extract a traffic experiment configuration from the instruction below.
Reply with one JSON object using any of these keys: scenario_name, regions, time_windows,
comparisons, persons_num, vehicles_num, algorithm, optimize.  Omit keys you are unsure of.
Current extraction: {current}
Instruction: {text}"""


def understand_instruction(text: str, llm: LlmEndpoint | MockTranscript | None = None,
                           gazetteer=None, notes: list[str] | None = None) -> TaskSpec:
    """Instruction text to a TaskSpec.

    Grammar extraction always runs first.  An optional model endpoint may
    override fields; its reply must merge into a spec that still validates,
    otherwise it is ignored (and the reason appended to ``notes``).
    """
    spec = parse_instruction(text, gazetteer).validate()
    if llm is None:
        return spec
    prompt = LLM_PROMPT.format(current=json.dumps(spec.to_dict(), sort_keys=True), text=text)
    try:
        reply = llm.complete(prompt) if isinstance(llm, MockTranscript) else post_chat(llm, prompt)
        m = re.search(r"\{.*\}", reply, re.S)
        if m is None:
            raise InvalidSpec("no JSON object in reply")
        override = json.loads(m.group(0))
        if not isinstance(override, dict):
            raise InvalidSpec("reply is not an object")
        merged = spec.to_dict()
        merged.update({k: v for k, v in override.items() if k in merged})
        if "regions" in override and "comparisons" not in override:
            merged["comparisons"] = []
        return TaskSpec.from_dict(merged).validate()
    except (TsaError, ValueError) as exc:
        if notes is not None:
            notes.append(f"model override ignored: {exc}")
        return spec


def validate_parameters(params: dict | TaskSpec) -> dict:
    """Validation report for a spec or spec dict: {"valid": bool, "errors": [...]}."""
    try:
        spec = params if isinstance(params, TaskSpec) else TaskSpec.from_dict(params)
        spec.validate()
    except InvalidSpec as exc:
        return {"valid": False, "errors": [str(exc)]}
    return {"valid": True, "errors": []}


def extract_key_parameters(spec: TaskSpec) -> dict:
    """Per-executor parameter groups for a spec."""
    windows = {label: (start, dur) for label, start, dur in spec.time_windows}
    first = spec.comparisons[0][1] if spec.comparisons else DEFAULT_WINDOW
    start, dur = windows.get(first, TIME_WINDOWS.get(first, (0, 3600)))
    return {
        "map_generator": {"regions": list(spec.regions), "green_time": 30.0, "yellow_time": 3.0},
        "trip_generator": {
            "age_ranges": [list(r) for r in spec.profile.age_ranges],
            "cons_ranges": [list(r) for r in spec.profile.cons_ranges],
            "gender_distribution": dict(spec.profile.gender_distribution),
            "education_distribution": dict(spec.profile.education_distribution),
            "start_step": start, "duration_step": dur,
            "persons_num": spec.persons_num, "vehicles_num": spec.vehicles_num,
        },
        "simulation_executor": {
            "algorithm": spec.algorithm, "scenario_name": spec.scenario_name,
            "reward_type": "composite", "llm_control_interval": 5,
            "start_step": start, "duration_step": dur,
        },
    }
