"""Instruction decomposition: free-form text to a typed sub-goal sequence.

A deterministic template grammar plays the role of the language model: it
splits an instruction on connectives, matches each clause against verb
templates, and normalizes synonyms. The same plan schema travels over the
decompose/1 wire protocol so an external model can be plugged in behind
`remote_decompose`. `corrupt_plan` injects controlled parsing errors for
ablation runs.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, replace

import httpx

DECOMPOSE_SCHEMA = "decompose/1"

SUBGOAL_KINDS = (
    "TAKEOFF",
    "NAVIGATE_TO",
    "FLY_OVER",
    "ASCEND_TO",
    "DESCEND_TO",
    "SEARCH",
    "HOVER",
    "LAND",
    "LAND_AT",
)

RELATION_KINDS = ("near", "left_of", "right_of", "behind", "in_front_of")

#: Sub-goal kinds that carry an object reference / a scalar argument.
GROUNDED_KINDS = ("NAVIGATE_TO", "FLY_OVER", "SEARCH", "LAND_AT")
SCALAR_KINDS = ("TAKEOFF", "ASCEND_TO", "DESCEND_TO", "HOVER")

DEFAULT_TAKEOFF_ALTITUDE = 2.0
DEFAULT_HOVER_SECONDS = 3.0

#: Action kinds each sub-goal needs available in the declared action space.
_NAV_ACTIONS = frozenset(
    {"MOVE_FORWARD", "TURN_LEFT", "TURN_RIGHT", "ASCEND", "DESCEND"})
REQUIRED_ACTIONS: dict[str, frozenset[str]] = {
    "TAKEOFF": frozenset({"TAKEOFF"}),
    "NAVIGATE_TO": _NAV_ACTIONS,
    "FLY_OVER": _NAV_ACTIONS,
    "SEARCH": frozenset({"TURN_LEFT", "ASCEND"}),
    "ASCEND_TO": frozenset({"ASCEND"}),
    "DESCEND_TO": frozenset({"DESCEND"}),
    "HOVER": frozenset({"HOVER"}),
    "LAND": frozenset({"LAND"}),
    "LAND_AT": _NAV_ACTIONS | {"LAND"},
}


class LanguageError(Exception):
    """Base class for decomposition errors."""


class UnparsableClause(LanguageError):
    def __init__(self, clause: str):
        super().__init__(f"no template matches clause {clause!r}")
        self.clause = clause


class UnknownAction(LanguageError):
    """A parsed sub-goal needs an action kind the platform does not offer."""


class BackendUnavailable(LanguageError):
    """Decomposition backend unreachable or returned a transport error."""


class SchemaViolation(LanguageError):
    """Wire document does not match the decompose/1 schema."""


class InvariantViolation(LanguageError):
    """A structurally valid document describes an ill-formed plan."""


@dataclass(frozen=True)
class Instruction:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("instruction text is empty")


@dataclass(frozen=True)
class Relation:
    kind: str
    anchor: "ObjectRef"

    def __post_init__(self) -> None:
        if self.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if self.anchor.relation is not None:
            raise ValueError("relation anchors cannot be related themselves")


@dataclass(frozen=True)
class ObjectRef:
    label: str
    attributes: frozenset[str] = frozenset()
    relation: Relation | None = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("object reference needs a label")

    def phrase(self) -> str:
        """Human-readable noun phrase, e.g. 'red car near bench'."""
        words = sorted(self.attributes) + [self.label]
        text = " ".join(words)
        if self.relation is not None:
            kind = self.relation.kind.replace("_", " ")
            text = f"{text} {kind} {self.relation.anchor.phrase()}"
        return text

    def to_json(self) -> dict:
        doc: dict = {"label": self.label, "attributes": sorted(self.attributes)}
        if self.relation is None:
            doc["relation"] = None
        else:
            doc["relation"] = {
                "kind": self.relation.kind,
                "anchor": {
                    "label": self.relation.anchor.label,
                    "attributes": sorted(self.relation.anchor.attributes),
                },
            }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "ObjectRef":
        _require_fields(doc, {"label", "attributes", "relation"},
                        optional={"relation"})
        relation = None
        rel_doc = doc.get("relation")
        if rel_doc is not None:
            _require_fields(rel_doc, {"kind", "anchor"})
            anchor_doc = rel_doc["anchor"]
            _require_fields(anchor_doc, {"label", "attributes"},
                            optional={"attributes"})
            anchor = ObjectRef(
                label=str(anchor_doc["label"]),
                attributes=frozenset(map(str, anchor_doc.get("attributes", []))),
            )
            relation = Relation(kind=str(rel_doc["kind"]), anchor=anchor)
        return ObjectRef(
            label=str(doc["label"]),
            attributes=frozenset(map(str, doc.get("attributes", []))),
            relation=relation,
        )


@dataclass(frozen=True)
class SubGoal:
    """One intermediate objective; exactly one of ref/value is set per kind."""

    kind: str
    ref: ObjectRef | None = None
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SUBGOAL_KINDS:
            raise ValueError(f"unknown sub-goal kind {self.kind!r}")
        if self.kind in GROUNDED_KINDS:
            if self.ref is None or self.value is not None:
                raise ValueError(f"{self.kind} takes an object reference")
        elif self.kind in SCALAR_KINDS:
            if self.value is None or self.ref is not None:
                raise ValueError(f"{self.kind} takes a scalar")
            if not self.value > 0:
                raise ValueError(f"{self.kind} scalar must be positive")
        else:  # LAND
            if self.ref is not None or self.value is not None:
                raise ValueError("LAND takes no argument")

    def to_json(self) -> dict:
        if self.kind in GROUNDED_KINDS:
            args: dict = {"ref": self.ref.to_json()}
        elif self.kind == "HOVER":
            args = {"seconds": self.value}
        elif self.kind in SCALAR_KINDS:
            args = {"altitude_m": self.value}
        else:
            args = {}
        return {"kind": self.kind, "args": args}

    @staticmethod
    def from_json(doc: dict) -> "SubGoal":
        _require_fields(doc, {"kind", "args"})
        kind = str(doc["kind"])
        if kind not in SUBGOAL_KINDS:
            raise SchemaViolation(f"unknown sub-goal kind {kind!r}")
        args = doc["args"]
        if not isinstance(args, dict):
            raise SchemaViolation("sub-goal args must be an object")
        try:
            if kind in GROUNDED_KINDS:
                _require_fields(args, {"ref"})
                return SubGoal(kind, ref=ObjectRef.from_json(args["ref"]))
            if kind == "HOVER":
                _require_fields(args, {"seconds"})
                return SubGoal(kind, value=float(args["seconds"]))
            if kind in SCALAR_KINDS:
                _require_fields(args, {"altitude_m"})
                return SubGoal(kind, value=float(args["altitude_m"]))
            _require_fields(args, set())
            return SubGoal(kind)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad args for {kind}: {exc}") from exc


@dataclass(frozen=True)
class SubGoalPlan:
    subgoals: tuple[SubGoal, ...]
    source: str  # "reference_parser" | "external_llm"

    def grounded_refs(self) -> list[ObjectRef]:
        return [sg.ref for sg in self.subgoals if sg.ref is not None]

    def to_json(self) -> dict:
        return {
            "schema": DECOMPOSE_SCHEMA,
            "subgoals": [sg.to_json() for sg in self.subgoals],
        }


def plan_violations(subgoals: tuple[SubGoal, ...]) -> list[str]:
    """Structural invariant check shared by the parser and the wire decoder."""
    problems = []
    if not subgoals:
        problems.append("plan is empty")
        return problems
    land_indexes = [i for i, sg in enumerate(subgoals)
                    if sg.kind in ("LAND", "LAND_AT")]
    if len(land_indexes) > 1:
        problems.append("more than one landing sub-goal")
    if land_indexes and land_indexes[-1] != len(subgoals) - 1:
        problems.append("landing sub-goal is not last")
    first_motion = next(
        (i for i, sg in enumerate(subgoals) if sg.kind != "TAKEOFF"), None)
    if first_motion is not None:
        if not any(sg.kind == "TAKEOFF" for sg in subgoals[:first_motion]):
            problems.append("first motion sub-goal is not preceded by TAKEOFF")
    return problems


def _require_fields(doc, fields: set[str], optional: set[str] | None = None):
    if not isinstance(doc, dict):
        raise SchemaViolation(f"expected object, got {type(doc).__name__}")
    unknown = set(doc) - fields
    if unknown:
        raise SchemaViolation(f"unknown fields {sorted(unknown)}")
    missing = fields - set(doc) - (optional or set())
    if missing:
        raise SchemaViolation(f"missing fields {sorted(missing)}")


# ---------------------------------------------------------------------------
# Reference grammar
# ---------------------------------------------------------------------------

_CONNECTIVE_RE = re.compile(r"\s*(?:,|\band then\b|\bthen\b|\bafter that\b)\s*")
_ARTICLES = {"the", "a", "an"}
_NUM = r"(\d+(?:\.\d+)?)"

# Relation keywords, longest surface form first.
_RELATION_SURFACE = (
    ("in front of", "in_front_of"),
    ("to the left of", "left_of"),
    ("to the right of", "right_of"),
    ("left of", "left_of"),
    ("right of", "right_of"),
    ("behind", "behind"),
    ("next to", "near"),
    ("near", "near"),
)

_TAKEOFF_RE = re.compile(
    rf"^(?:take off|takeoff|take-off|lift off|launch)"
    rf"(?:\s+to\s+{_NUM}\s*(?:m|meter|meters|metre|metres)?)?$")
_HOVER_RE = re.compile(
    rf"^(?:hover|hold position|wait)"
    rf"(?:\s+(?:for\s+)?{_NUM}\s*(?:s|sec|secs|second|seconds)?)?$")
_ASCEND_RE = re.compile(
    rf"^(?:climb to|ascend to|rise to|go up to)\s+{_NUM}"
    rf"\s*(?:m|meter|meters|metre|metres)?$")
_DESCEND_RE = re.compile(
    rf"^(?:descend to|drop to|go down to|lower to)\s+{_NUM}"
    rf"\s*(?:m|meter|meters|metre|metres)?$")
_LAND_AT_RE = re.compile(r"^land (?:on|at)\s+(.+)$")
_LAND_RE = re.compile(r"^land$")
_FLY_OVER_RE = re.compile(r"^(?:fly over|pass over|go over|fly above)\s+(.+)$")
_NAVIGATE_RE = re.compile(
    r"^(?:fly to|fly toward|fly towards|go to|navigate to|head to|move to|"
    r"approach)\s+(.+)$")
_SEARCH_RE = re.compile(r"^(?:search for|look for|find|locate|scan for)\s+(.+)$")


def _strip_articles(words: list[str]) -> list[str]:
    return [w for w in words if w not in _ARTICLES]


def _parse_simple_ref(text: str, clause: str) -> ObjectRef:
    words = _strip_articles(text.split())
    if not words:
        raise UnparsableClause(clause)
    return ObjectRef(label=words[-1], attributes=frozenset(words[:-1]))


def parse_object_ref(text: str, clause: str | None = None) -> ObjectRef:
    """Parse '[attribute]* label [relation anchor]' noun phrases."""
    clause = clause if clause is not None else text
    text = text.strip()
    for surface, kind in _RELATION_SURFACE:
        m = re.search(rf"\b{re.escape(surface)}\b", text)
        if m:
            target_text = text[:m.start()].strip()
            anchor_text = text[m.end():].strip()
            if not target_text or not anchor_text:
                raise UnparsableClause(clause)
            anchor = _parse_simple_ref(anchor_text, clause)
            target = _parse_simple_ref(target_text, clause)
            return replace(target, relation=Relation(kind, anchor))
    return _parse_simple_ref(text, clause)


def _parse_clause(clause: str) -> SubGoal:
    m = _TAKEOFF_RE.match(clause)
    if m:
        alt = float(m.group(1)) if m.group(1) else DEFAULT_TAKEOFF_ALTITUDE
        return SubGoal("TAKEOFF", value=alt)
    m = _HOVER_RE.match(clause)
    if m:
        secs = float(m.group(1)) if m.group(1) else DEFAULT_HOVER_SECONDS
        return SubGoal("HOVER", value=secs)
    m = _ASCEND_RE.match(clause)
    if m:
        return SubGoal("ASCEND_TO", value=float(m.group(1)))
    m = _DESCEND_RE.match(clause)
    if m:
        return SubGoal("DESCEND_TO", value=float(m.group(1)))
    m = _LAND_AT_RE.match(clause)
    if m:
        return SubGoal("LAND_AT", ref=parse_object_ref(m.group(1), clause))
    if _LAND_RE.match(clause):
        return SubGoal("LAND")
    m = _FLY_OVER_RE.match(clause)
    if m:
        return SubGoal("FLY_OVER", ref=parse_object_ref(m.group(1), clause))
    m = _NAVIGATE_RE.match(clause)
    if m:
        return SubGoal("NAVIGATE_TO", ref=parse_object_ref(m.group(1), clause))
    m = _SEARCH_RE.match(clause)
    if m:
        return SubGoal("SEARCH", ref=parse_object_ref(m.group(1), clause))
    raise UnparsableClause(clause)


def split_clauses(text: str) -> list[str]:
    clauses = []
    for part in _CONNECTIVE_RE.split(text.lower().strip()):
        part = part.strip()
        if part.startswith("and "):
            part = part[4:].strip()
        if part:
            clauses.append(part)
    return clauses


def parse_instruction(
    instruction: Instruction,
    action_space: tuple[str, ...] | None = None,
) -> SubGoalPlan:
    """Deterministically decompose an instruction into a sub-goal plan.

    The plan is post-processed to satisfy the structural invariants: a
    TAKEOFF at default altitude is prepended when the instruction starts with
    a motion sub-goal (episodes begin landed). Text demanding an ill-formed
    plan, e.g. landing mid-sequence, fails loudly instead of being repaired.
    """
    clauses = split_clauses(instruction.text)
    if not clauses:
        raise UnparsableClause(instruction.text)
    subgoals = [_parse_clause(c) for c in clauses]
    if subgoals[0].kind != "TAKEOFF":
        subgoals.insert(0, SubGoal("TAKEOFF", value=DEFAULT_TAKEOFF_ALTITUDE))
    problems = plan_violations(tuple(subgoals))
    if problems:
        raise InvariantViolation("; ".join(problems))
    if action_space is not None:
        available = set(action_space)
        for sg in subgoals:
            missing = REQUIRED_ACTIONS[sg.kind] - available
            if missing:
                raise UnknownAction(
                    f"{sg.kind} needs unavailable actions {sorted(missing)}")
    return SubGoalPlan(tuple(subgoals), source="reference_parser")


# ---------------------------------------------------------------------------
# Wire protocol
# ---------------------------------------------------------------------------

def plan_from_wire(doc: dict) -> SubGoalPlan:
    """Decode and validate a decompose/1 response document."""
    _require_fields(doc, {"schema", "subgoals"})
    if doc["schema"] != DECOMPOSE_SCHEMA:
        raise SchemaViolation(f"unsupported schema {doc['schema']!r}")
    if not isinstance(doc["subgoals"], list):
        raise SchemaViolation("subgoals must be a list")
    try:
        subgoals = tuple(SubGoal.from_json(sg) for sg in doc["subgoals"])
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from exc
    problems = plan_violations(subgoals)
    if problems:
        raise InvariantViolation("; ".join(problems))
    return SubGoalPlan(subgoals, source="external_llm")


def decompose_request(
    instruction: Instruction,
    action_space: tuple[str, ...],
    scene_vocabulary: tuple[str, ...],
) -> dict:
    return {
        "schema": DECOMPOSE_SCHEMA,
        "instruction": instruction.text,
        "action_space": list(action_space),
        "scene_vocabulary": list(scene_vocabulary),
    }


def remote_decompose(
    instruction: Instruction,
    action_space: tuple[str, ...],
    backend_url: str,
    scene_vocabulary: tuple[str, ...] = (),
    timeout: float = 5.0,
) -> SubGoalPlan:
    """Decompose via an external backend speaking the decompose/1 protocol.

    Validation failures are surfaced as SchemaViolation/InvariantViolation;
    there is no silent fallback to the reference grammar.
    """
    request = decompose_request(instruction, action_space, scene_vocabulary)
    try:
        response = httpx.post(backend_url, json=request, timeout=timeout)
    except httpx.HTTPError as exc:
        raise BackendUnavailable(f"decompose backend: {exc}") from exc
    if response.status_code != 200:
        raise BackendUnavailable(
            f"decompose backend returned HTTP {response.status_code}")
    try:
        doc = response.json()
    except ValueError as exc:
        raise SchemaViolation(f"response is not JSON: {exc}") from exc
    return plan_from_wire(doc)


# ---------------------------------------------------------------------------
# Ablation corruption
# ---------------------------------------------------------------------------

_FALLBACK_VOCAB = ("box", "car", "tree", "chair")
_CORRUPT_SCALARS = {"TAKEOFF": 2.0, "HOVER": 3.0, "ASCEND_TO": 4.0,
                    "DESCEND_TO": 1.0}


def _subgoal_seed(seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def _random_subgoal(kind: str, rng: random.Random,
                    vocabulary: tuple[str, ...]) -> SubGoal:
    if kind in GROUNDED_KINDS:
        label = rng.choice(sorted(vocabulary)) if vocabulary else "object"
        return SubGoal(kind, ref=ObjectRef(label))
    if kind == "LAND":
        return SubGoal("LAND")
    return SubGoal(kind, value=_CORRUPT_SCALARS[kind])


def corrupt_plan(
    plan: SubGoalPlan,
    rate: float,
    rng_seed: int,
    vocabulary: tuple[str, ...] = _FALLBACK_VOCAB,
) -> SubGoalPlan:
    """Independently corrupt each sub-goal with the given probability.

    A corrupted sub-goal either switches to a random other kind or swaps its
    object label for another scene-vocabulary label. Each position draws from
    its own seed stream, so the set of corrupted positions is nested across
    increasing rates for a fixed seed. The result is re-repaired to satisfy
    the structural plan invariants.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be within [0, 1]")
    last = len(plan.subgoals) - 1
    out: list[SubGoal] = []
    for i, sg in enumerate(plan.subgoals):
        rng = random.Random(_subgoal_seed(rng_seed, i))
        if rng.random() >= rate:
            out.append(sg)
            continue
        modes = ["kind"]
        if sg.ref is not None and any(v != sg.ref.label for v in vocabulary):
            modes.append("label")
        mode = rng.choice(modes)
        if mode == "label":
            new_label = rng.choice(
                sorted(v for v in vocabulary if v != sg.ref.label))
            out.append(replace(sg, ref=ObjectRef(new_label, sg.ref.attributes)))
        else:
            kinds = [k for k in SUBGOAL_KINDS if k != sg.kind
                     and (i == last or k not in ("LAND", "LAND_AT"))]
            out.append(_random_subgoal(rng.choice(kinds), rng, vocabulary))
    if out and out[0].kind != "TAKEOFF":
        out.insert(0, SubGoal("TAKEOFF", value=DEFAULT_TAKEOFF_ALTITUDE))
    return SubGoalPlan(tuple(out), source=plan.source)
