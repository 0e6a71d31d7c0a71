"""Scenario files: JSON in, validated frozen dataclasses out."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from core import config
from core.errors import InvalidScenario
from replicas import PROTOCOLS
from replicas.ditto import ADOPTION_POLICIES

ADVERSARY_KINDS = ("synchronous", "partial_synchrony", "asynchronous", "leader_ddos", "crash", "composite")
PROTOCOL_NAMES = tuple(PROTOCOLS)


@dataclass(frozen=True)
class AdversaryPolicy:
    kind: str = "synchronous"
    crash_set: tuple[int, ...] = ()
    ddos_delay: int = 0
    reorder: int = config.ASYNC_REORDER
    parts: tuple[str, ...] = ()

    def has(self, kind: str) -> bool:
        return self.kind == kind or (self.kind == "composite" and kind in self.parts)


@dataclass(frozen=True)
class Duration:
    ticks: int
    blocks: int | None = None


@dataclass(frozen=True)
class Scenario:
    n: int
    f: int
    protocol: str
    adversary: AdversaryPolicy = field(default_factory=AdversaryPolicy)
    delta: int = config.DEFAULT_DELTA
    tau: int = config.DEFAULT_TAU
    gst: int | None = None
    seed: int = 0
    duration: Duration = Duration(10_000)
    load_rate: float = 0.0
    batch_size: int = 1
    backoff_factor: int = config.BACKOFF_FACTOR
    adoption: str = "rank"

    def __post_init__(self):
        validate(self)

    @property
    def crash_set(self) -> tuple[int, ...]:
        return self.adversary.crash_set

    def to_dict(self) -> dict:
        data = asdict(self)
        data["crash_set"] = list(self.adversary.crash_set)
        data["ddos_delay"] = self.adversary.ddos_delay
        data["adversary"] = {"kind": self.adversary.kind, "reorder": self.adversary.reorder,
                             "parts": list(self.adversary.parts)}
        data["duration"] = {"ticks": self.duration.ticks, "blocks": self.duration.blocks}
        return data

    def with_overrides(self, *, protocol: str | None = None, adversary: str | None = None,
                       seed: int | None = None) -> Scenario:
        changes: dict = {}
        if protocol is not None:
            changes["protocol"] = protocol
            if protocol == "vaba2":
                changes["tau"] = 0
            elif self.tau <= 0:
                changes["tau"] = 4 * self.delta
        if adversary is not None:
            changes["adversary"] = replace(self.adversary, kind=adversary, parts=())
        if seed is not None:
            changes["seed"] = seed
        return replace(self, **changes) if changes else self


def validate(s: Scenario) -> None:
    # deal() accepts f=0, but a lone replica only delivers to itself at zero delay
    # and simulated time would never advance
    if s.f < 1 or s.n != 3 * s.f + 1:
        raise InvalidScenario(f"n={s.n}, f={s.f}: need n = 3f+1 with f >= 1 (a single replica never advances time)")
    if s.protocol not in PROTOCOL_NAMES:
        raise InvalidScenario(f"unknown protocol {s.protocol!r}")
    if s.delta < 1:
        raise InvalidScenario("delta must be at least 1 tick")
    if s.tau <= 0 and s.protocol != "vaba2":
        raise InvalidScenario("tau must be positive unless protocol is vaba2")
    if s.duration.ticks <= 0 or (s.duration.blocks is not None and s.duration.blocks <= 0):
        raise InvalidScenario("duration must be positive")
    if s.load_rate < 0 or s.batch_size < 1:
        raise InvalidScenario("load_rate must be >= 0 and batch_size >= 1")
    if s.backoff_factor < 1:
        raise InvalidScenario("backoff_factor must be >= 1")
    if s.adoption not in ADOPTION_POLICIES:
        raise InvalidScenario(f"adoption must be one of {ADOPTION_POLICIES}")

    adv = s.adversary
    if adv.kind not in ADVERSARY_KINDS:
        raise InvalidScenario(f"unknown adversary kind {adv.kind!r}")
    for part in adv.parts:
        if part not in ADVERSARY_KINDS or part == "composite":
            raise InvalidScenario(f"invalid composite part {part!r}")
    if adv.kind == "composite" and not adv.parts:
        raise InvalidScenario("composite adversary needs parts")
    if len(set(adv.crash_set)) > s.f or any(not 0 <= i < s.n for i in adv.crash_set):
        raise InvalidScenario(f"crash_set {list(adv.crash_set)} must hold at most f={s.f} valid ids")
    if adv.ddos_delay < 0 or adv.reorder < 1:
        raise InvalidScenario("ddos_delay must be >= 0 and reorder >= 1")
    if adv.has("partial_synchrony") and s.gst is None:
        raise InvalidScenario("partial_synchrony needs gst")


def _duration(raw) -> Duration:
    if isinstance(raw, dict):
        blocks = raw.get("blocks")
        return Duration(int(raw["ticks"]), int(blocks) if blocks is not None else None)
    return Duration(int(raw))


def _adversary(raw, data: dict) -> AdversaryPolicy:
    if isinstance(raw, str):
        raw = {"kind": raw}
    raw = raw or {}
    return AdversaryPolicy(
        kind=raw.get("kind", "synchronous"),
        crash_set=tuple(sorted(int(i) for i in data.get("crash_set", raw.get("crash_set", ())))),
        ddos_delay=int(data.get("ddos_delay", raw.get("ddos_delay", 0))),
        reorder=int(raw.get("reorder", config.ASYNC_REORDER)),
        parts=tuple(raw.get("parts", ())),
    )


def _default_tau(data: dict, delta: int) -> int:
    if data.get("protocol") == "vaba2":
        return 0
    return 4 * delta if "delta" in data else config.DEFAULT_TAU


def scenario_from_dict(data: dict) -> Scenario:
    try:
        delta = int(data.get("delta", config.DEFAULT_DELTA))
        return Scenario(
            n=int(data["n"]),
            f=int(data["f"]),
            protocol=data["protocol"],
            adversary=_adversary(data.get("adversary"), data),
            delta=delta,
            tau=int(data.get("tau", _default_tau(data, delta))),
            gst=int(data["gst"]) if data.get("gst") is not None else None,
            seed=int(data.get("seed", 0)),
            duration=_duration(data.get("duration", 10_000)),
            load_rate=float(data.get("load_rate", 0.0)),
            batch_size=int(data.get("batch_size", 1)),
            backoff_factor=int(data.get("backoff_factor", config.BACKOFF_FACTOR)),
            adoption=data.get("adoption", "rank"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidScenario(f"malformed scenario: {e!r}") from e


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidScenario(f"cannot read scenario {path}: {e}") from e
    scenario = scenario_from_dict(data)
    if config.CHAINSMR_SEED is not None:
        scenario = replace(scenario, seed=config.CHAINSMR_SEED)
    return scenario
