"""Reasoning modules that drive sessions: scripted baselines and a remote client.

Scripted agents are stateless across calls by contract: everything they know
about a session arrives in the TurnContext, and anything they want to carry
forward they serialize into memory.rationale (as JSON) so it comes back via
prior_outputs.  That keeps them safe to share across concurrent sessions.

The remote agent speaks an OpenAI-style chat-completions HTTP API with
base64 PNG image parts.  Its bearer token is read from an environment
variable at request time and never stored, logged, or echoed in errors.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import httpx

from .geometry import rotation_equivalent
from .loop import AgentTransportError
from .protocol import (
    ANSWER_LABELS,
    CommandSequence,
    TurnContext,
    TurnMemory,
    TurnOutput,
    TurnParseError,
    parse_sequence,
    parse_turn_output,
    serialize_turn_output,
)
from .render import DEFAULT_SETTINGS, RasterImage, decode_png, grid_cells, image_diff


def _turn(
    iteration: int,
    rationale: str,
    conclusions: dict[str, str],
    commands: list[tuple[str, str]],
    final_answer: str | None = None,
) -> str:
    memory = TurnMemory(
        rationale=rationale,
        partial_conclusion=tuple((l, conclusions.get(l, "unknown")) for l in ANSWER_LABELS),
    )
    seqs = tuple(
        CommandSequence(target=t, raw=raw, steps=tuple(parse_sequence(raw)))
        for t, raw in commands
    )
    out = TurnOutput(
        memory=memory,
        iteration_number=iteration,
        commands=seqs,
        final_answer=final_answer,
    )
    return serialize_turn_output(out, fenced=True)


def _last_rationale_json(context: TurnContext) -> dict:
    """Recover the JSON state this agent serialized into its previous turn."""
    for raw in reversed(context.prior_outputs):
        try:
            turn = parse_turn_output(raw)
        except TurnParseError:
            continue
        try:
            state = json.loads(turn.memory.rationale)
        except ValueError:
            continue
        if isinstance(state, dict):
            return state
    return {}


def _decode_image(png: bytes) -> RasterImage:
    return decode_png(png)


def _grid_for(context: TurnContext, target: str) -> RasterImage | None:
    for name, png in context.last_grids:
        if name == target:
            return _decode_image(png)
    return None


class EagerAnswerAgent:
    """Answers immediately every turn; exercises the minimum-iteration policy."""

    name = "eager"

    def __init__(self, answer: str = "A"):
        if answer not in ANSWER_LABELS:
            raise ValueError(f"answer must be one of {ANSWER_LABELS}")
        self.answer = answer

    def take_turn(self, context: TurnContext) -> str:
        conclusions = {
            l: ("probably_the_odd_one" if l == self.answer else "probably_not_the_answer")
            for l in ANSWER_LABELS
        }
        return _turn(
            context.iteration,
            f"answering {self.answer} without exploration",
            conclusions,
            [],
            final_answer=self.answer,
        )


class VoxelOracleAgent:
    """Ground-truth upper bound: reads the shapes out-of-band, never the images.

    Emits zero-rotation turns until the minimum iteration count, then answers
    the option whose cell set is not rotation-equivalent to the original.
    """

    name = "voxel_oracle"

    def __init__(self, problems, min_iterations: int = 5):
        self._problems = {p.id: p for p in problems}
        self.min_iterations = min_iterations

    def _odd(self, problem_id: str) -> str:
        problem = self._problems[problem_id]
        odd = [
            label
            for label, shape in problem.options
            if not rotation_equivalent(shape, problem.original)
        ]
        if len(odd) != 1:
            raise RuntimeError(f"problem {problem_id} lacks a unique odd option")
        return odd[0]

    def take_turn(self, context: TurnContext) -> str:
        if context.iteration < self.min_iterations:
            return _turn(
                context.iteration,
                "waiting out the minimum iteration count",
                {l: "unknown" for l in ANSWER_LABELS},
                [("A", "left:0")],
            )
        answer = self._odd(context.problem_id)
        conclusions = {
            l: ("probably_the_odd_one" if l == answer else "probably_not_the_answer")
            for l in ANSWER_LABELS
        }
        return _turn(
            context.iteration,
            "cell sets compared under all 24 grid rotations",
            conclusions,
            [],
            final_answer=answer,
        )


# Views requested after each reset; together with the identity view they
# show every face of every object, so any structural difference is visible.
RESET_MATCH_VIEWS = ("down:90", "left:90", "left:180", "left:270", "up:90")

_PAIRS = (("A", "B"), ("A", "C"), ("B", "C"))


class ResetMatchAgent:
    """Condition-1 strategy: reset everything, compare the aligned snapshots.

    All objects share one build frame, so after reset the two matching
    options render byte-identically from every requested view while the odd
    one differs somewhere.  Comparisons are pairwise between options, plus
    against the original when the session allows rotating it.
    """

    name = "reset_match"

    def take_turn(self, context: TurnContext) -> str:
        state = _last_rationale_json(context)
        if state.get("mode") == "abstain" or any(
            "reset is disabled" in n for n in context.notices
        ):
            return _turn(
                context.iteration,
                json.dumps({"mode": "abstain"}),
                {l: "unknown" for l in ANSWER_LABELS},
                [("A", "left:0")],
            )

        use_original = state.get("use_original", True)
        if any("rotating the original is disabled" in n for n in context.notices):
            use_original = False
        prev_mism = state.get("mism", {})
        mism = {f"{a}|{b}": bool(prev_mism.get(f"{a}|{b}", False)) for a, b in _PAIRS}
        vs_original = {
            l: bool(state.get("vs_original", {}).get(l, False)) for l in ANSWER_LABELS
        }

        tiles: dict[str, RasterImage] = {}
        if context.iteration >= 2:
            for label in ANSWER_LABELS + ("original",):
                grid = _grid_for(context, label)
                if grid is None:
                    continue
                cells = grid_cells(grid, DEFAULT_SETTINGS)
                tiles[label] = cells[-1]  # the view after the full sequence
            for a, b in _PAIRS:
                if a in tiles and b in tiles:
                    if image_diff(tiles[a], tiles[b]) > 0.0:
                        mism[f"{a}|{b}"] = True
            # only trust the original's grid when this agent actually moved it;
            # otherwise it is a fill snapshot at the calibrated pose
            if use_original and "original" in tiles:
                for label in ANSWER_LABELS:
                    if label in tiles and image_diff(tiles[label], tiles["original"]) > 0.0:
                        vs_original[label] = True

        new_state = {
            "mode": "scan",
            "use_original": use_original,
            "mism": mism,
            "vs_original": vs_original,
        }

        n_views = len(RESET_MATCH_VIEWS)
        if context.iteration <= 1 + n_views:
            if context.iteration == 1:
                seq = "reset"
            else:
                seq = "reset," + RESET_MATCH_VIEWS[context.iteration - 2]
            targets = list(ANSWER_LABELS) + (["original"] if use_original else [])
            return _turn(
                context.iteration,
                json.dumps(new_state),
                {l: "unknown" for l in ANSWER_LABELS},
                [(t, seq) for t in targets],
            )

        # all views seen: the matching pair never mismatched
        clean = [pair for pair in _PAIRS if not mism[f"{pair[0]}|{pair[1]}"]]
        if len(clean) == 1:
            answer = next(l for l in ANSWER_LABELS if l not in clean[0])
        elif any(vs_original.values()) and sum(vs_original.values()) == 1:
            answer = next(l for l in ANSWER_LABELS if vs_original[l])
        else:
            counts = {
                l: sum(1 for a, b in _PAIRS if l in (a, b) and mism[f"{a}|{b}"])
                for l in ANSWER_LABELS
            }
            answer = max(ANSWER_LABELS, key=lambda l: (counts[l], l))
        conclusions = {
            l: ("probably_the_odd_one" if l == answer else "probably_not_the_answer")
            for l in ANSWER_LABELS
        }
        return _turn(
            context.iteration,
            json.dumps(new_state),
            conclusions,
            [],
            final_answer=answer,
        )


def _orbit_sequences() -> tuple[str, ...]:
    """Eight sweep sequences whose step prefixes visit all 24 grid rotations."""
    circles = [
        ",".join(["right:30"] * 12),
        ",".join(["up:30"] * 12),
        ",".join(["rotate:cw:30"] * 12),
    ]
    compounds = []
    for lead, undo in (
        ("right:90", "left:90"),
        ("left:90", "right:90"),
        ("right:180", "left:180"),
        ("up:90", "down:90"),
        ("down:90", "up:90"),
    ):
        compounds.append(
            ",".join([lead] + ["rotate:cw:90"] * 4 + [undo])
        )
    return tuple(circles + compounds)


ORBIT_SEQUENCES = _orbit_sequences()

# Any frame of a matching option aligns exactly (diff 0.0) with the original
# snapshot somewhere along the orbit; the forge audit keeps the odd object's
# best frame above 1e-3.  The decision threshold sits between the two.
ORBIT_MATCH_THRESHOLD = 2e-4


class OrbitSearchAgent:
    """Condition-2 strategy: sweep each option through full circles and
    compound turns, then pick the option whose best frame still differs
    from the original snapshot."""

    name = "orbit_search"

    def __init__(self, threshold: float = ORBIT_MATCH_THRESHOLD):
        self.threshold = threshold

    def take_turn(self, context: TurnContext) -> str:
        state = _last_rationale_json(context)
        best = {l: state.get("best", {}).get(l) for l in ANSWER_LABELS}

        # score the option swept in the previous iteration
        if 2 <= context.iteration <= 4:
            swept = ANSWER_LABELS[context.iteration - 2]
            grid = _grid_for(context, swept)
            if grid is not None:
                original = _decode_image(context.original_snapshot)
                frames = grid_cells(grid, DEFAULT_SETTINGS)
                best[swept] = min(image_diff(f, original) for f in frames)

        new_state = {"best": {l: v for l, v in best.items() if v is not None}}

        if context.iteration <= 3:
            target = ANSWER_LABELS[context.iteration - 1]
            return _turn(
                context.iteration,
                json.dumps(new_state),
                {l: "unknown" for l in ANSWER_LABELS},
                [(target, seq) for seq in ORBIT_SEQUENCES],
            )
        if context.iteration == 4:
            return _turn(
                context.iteration,
                json.dumps(new_state),
                {l: "unknown" for l in ANSWER_LABELS},
                [("A", "left:0")],
            )

        scored = {l: (v if v is not None else 0.0) for l, v in best.items()}
        over = [l for l in ANSWER_LABELS if scored[l] > self.threshold]
        if len(over) == 1:
            answer = over[0]
        else:
            answer = max(ANSWER_LABELS, key=lambda l: (scored[l], l))
        conclusions = {
            l: ("probably_the_odd_one" if l == answer else "probably_not_the_answer")
            for l in ANSWER_LABELS
        }
        return _turn(
            context.iteration,
            json.dumps(new_state),
            conclusions,
            [],
            final_answer=answer,
        )


# --- remote chat agent ------------------------------------------------------

class AgentConfigError(Exception):
    """Raised for unusable remote-agent configuration (e.g. missing token)."""


@dataclass(frozen=True)
class RemoteChatConfig:
    """Transport settings for an OpenAI-style chat-completions endpoint.

    auth_env names the environment variable holding the bearer token; the
    token itself is read per request and never stored or logged.
    """

    endpoint: str
    model: str
    auth_env: str = "SPINSTACK_API_TOKEN"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    temperature: float = 0.0
    max_tokens: int | None = None


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def _to_chat_parts(parts: list[dict]) -> list[dict]:
    out = []
    for part in parts:
        if part["type"] == "text":
            out.append({"type": "text", "text": part["text"]})
        elif part["type"] == "image_png":
            out.append(
                {
                    "type": "image_url",
                    "image_url": {"url": "data:image/png;base64," + part["base64"]},
                }
            )
        else:
            raise ValueError(f"unknown context part type {part['type']!r}")
    return out


class RemoteChatAgent:
    """Drives a remote multimodal chat model through the turn protocol.

    One repair round-trip is attempted when a reply fails to parse: the bad
    reply and the parse error go back to the model, and whatever it says
    next is returned for the session loop to judge.
    """

    name = "remote"

    def __init__(
        self,
        config: RemoteChatConfig,
        prompt: str,
        transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self.prompt = prompt
        self._client = httpx.Client(
            transport=transport, timeout=config.timeout_s
        )

    def _token(self) -> str:
        token = os.environ.get(self.config.auth_env, "")
        if not token:
            raise AgentConfigError(
                f"environment variable {self.config.auth_env} is not set"
            )
        return token

    def complete(self, messages: list[dict]) -> str:
        """POST one chat request with retries; returns the reply text."""
        body = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        if self.config.max_tokens is not None:
            body["max_tokens"] = self.config.max_tokens
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(
                    self.config.endpoint,
                    json=body,
                    headers={"Authorization": f"Bearer {self._token()}"},
                )
            except httpx.TransportError as exc:
                last_error = f"transport error: {type(exc).__name__}"
                continue
            if response.status_code in (401, 403):
                raise AgentConfigError(
                    f"endpoint rejected credentials (HTTP {response.status_code}); "
                    f"check the {self.config.auth_env} environment variable"
                )
            if response.status_code in _RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise AgentTransportError(f"HTTP {response.status_code} from endpoint")
            try:
                doc = response.json()
                text = doc["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise AgentTransportError("malformed chat-completion response body")
            if not isinstance(text, str):
                raise AgentTransportError("chat-completion content is not text")
            return text
        raise AgentTransportError(
            f"retries exhausted after {self.config.max_retries + 1} attempts "
            f"({last_error})"
        )

    def _messages(self, context: TurnContext) -> list[dict]:
        from .protocol import serialize_turn_context

        messages = [
            {"role": "system", "content": [{"type": "text", "text": self.prompt}]}
        ]
        for msg in serialize_turn_context(context):
            messages.append(
                {"role": msg["role"], "content": _to_chat_parts(msg["content"])}
            )
        return messages

    def take_turn(self, context: TurnContext) -> str:
        messages = self._messages(context)
        text = self.complete(messages)
        try:
            parse_turn_output(text)
            return text
        except TurnParseError as exc:
            repair = messages + [
                {"role": "assistant", "content": [{"type": "text", "text": text}]},
                {
                    "role": "user",
                    "content": [
                        {
                            "type": "text",
                            "text": (
                                f"Your reply could not be parsed: {exc}. "
                                "Reply again with exactly one JSON object "
                                "matching the required schema and no other text."
                            ),
                        }
                    ],
                },
            ]
            return self.complete(repair)

    def close(self) -> None:
        self._client.close()
