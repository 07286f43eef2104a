"""The two trace obfuscation transformations and their composition.

Insertion: after each event, with probability p_i, a burst of c events
(c uniform in {min_i..max_i}) is injected, each drawn uniformly with
replacement from the pool of insertable events already seen in the input
trace (including the current one). Injected copies of side-effecting calls
get their parameters neutralized so they cannot collide with real data.

Reordering: side-effecting calls are, with probability p_r, diverted into
a FIFO delay queue; when the queue fills up (or the trace ends) it is
flushed in original order, and each flushed call may trigger its own
insertion burst with probability p_ri.

Everything is driven by per-trace Philox streams keyed by the profile seed
and the trace id, so corpus-level results do not depend on processing
order. All randomness for one pass is drawn as whole arrays up front;
pool picks map pre-drawn uniforms onto the current pool size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog, is_insertable
from .errors import ParamError, ParseError
from .rng import stream
from .trace import SyscallEvent, Trace

NEUTRAL_PREFIX = "feebo"


@dataclass(frozen=True)
class InsertionParams:
    p_i: float
    min_i: int
    max_i: int

    def __post_init__(self):
        if not 0.0 <= self.p_i <= 1.0:
            raise ParamError(f"p_i must be in [0, 1], got {self.p_i}")
        if self.min_i < 0 or self.max_i < self.min_i:
            raise ParamError(f"need 0 <= min_i <= max_i, got {self.min_i}..{self.max_i}")


@dataclass(frozen=True)
class ReorderingParams:
    p_r: float
    queue_size: int
    p_ri: float
    min_ri: int
    max_ri: int

    def __post_init__(self):
        if not 0.0 <= self.p_r <= 1.0:
            raise ParamError(f"p_r must be in [0, 1], got {self.p_r}")
        if not 0.0 <= self.p_ri <= 1.0:
            raise ParamError(f"p_ri must be in [0, 1], got {self.p_ri}")
        if self.queue_size < 1:
            raise ParamError(f"queue_size must be >= 1, got {self.queue_size}")
        if self.min_ri < 0 or self.max_ri < self.min_ri:
            raise ParamError(f"need 0 <= min_ri <= max_ri, got {self.min_ri}..{self.max_ri}")


@dataclass(frozen=True)
class ObfuscationProfile:
    seed: int
    insertion: InsertionParams | None = None
    reordering: ReorderingParams | None = None

    def is_identity(self) -> bool:
        return self.insertion is None and self.reordering is None


def neutralize(event: SyscallEvent, trace_id: str, counter: int) -> SyscallEvent:
    """A synthetic copy of `event` whose params cannot collide with real data."""
    params = tuple(f"{NEUTRAL_PREFIX}_{trace_id}_{counter}_{j}"
                   for j in range(len(event.params)))
    return SyscallEvent(name=event.name, params=params, synthetic=True)


class _BurstDraws:
    """Pre-drawn randomness for one pass: one slot per input position."""

    def __init__(self, rng: np.random.Generator, length: int, lo: int, hi: int):
        self.gate = rng.random(length)
        self.count = rng.integers(lo, hi + 1, size=length) if length else np.empty(0, np.int64)
        offsets = np.zeros(length + 1, dtype=np.int64)
        np.cumsum(self.count, out=offsets[1:])
        self.offset = offsets
        self.pick = rng.random(int(offsets[-1]))


class _Inserter:
    """Shared burst machinery: the prefix pool and neutralization counter."""

    def __init__(self, trace: Trace, catalog: Catalog, counter_start: int = 0):
        self.events = trace.events
        self.trace_id = trace.id
        self.side_effects = catalog.side_effect_set
        self.insertable = [is_insertable(catalog, e.name) for e in trace.events]
        self.pool: list[int] = []
        self.counter = counter_start

    def admit(self, position: int) -> None:
        if self.insertable[position]:
            self.pool.append(position)

    def burst(self, position: int, draws: _BurstDraws, p: float, out: list) -> None:
        """Maybe append a synthetic burst for the event at `position`."""
        if not (draws.gate[position] < p) or not self.pool:
            return
        base = draws.offset[position]
        for j in range(int(draws.count[position])):
            pick = int(draws.pick[base + j] * len(self.pool))
            source = self.events[self.pool[min(pick, len(self.pool) - 1)]]
            if source.name in self.side_effects:
                out.append(neutralize(source, self.trace_id, self.counter))
                self.counter += 1
            else:
                out.append(SyscallEvent(name=source.name, params=source.params,
                                        synthetic=True))


def apply_insertion(trace: Trace, params: InsertionParams, catalog: Catalog,
                    rng: np.random.Generator, _counter_start: int = 0) -> Trace:
    """Inject random bursts after events; originals pass through untouched.

    The burst pool is the insertable prefix of the *input* trace, never the
    growing output, so injected events cannot amplify themselves. An empty
    pool skips the burst.
    """
    inserter = _Inserter(trace, catalog, _counter_start)
    draws = _BurstDraws(rng, len(trace.events), params.min_i, params.max_i)
    out: list[SyscallEvent] = []
    for k, event in enumerate(trace.events):
        inserter.admit(k)
        out.append(event)
        inserter.burst(k, draws, params.p_i, out)
    return Trace(id=trace.id, label=trace.label, events=tuple(out))


def apply_reordering(trace: Trace, params: ReorderingParams, catalog: Catalog,
                     rng: np.random.Generator) -> Trace:
    """Delay side-effecting calls through a FIFO queue, flushing in order.

    Only side-effect calls are diverted (everything else reads state the
    program needs right away); the queue preserves their relative order.
    Each flushed call may trigger an insertion burst from the prefix pool.
    The residual queue is flushed at end of trace so no event is dropped.
    """
    inserter = _Inserter(trace, catalog)
    length = len(trace.events)
    delay_gate = rng.random(length)
    draws = _BurstDraws(rng, length, params.min_ri, params.max_ri)
    out: list[SyscallEvent] = []
    queue: list[int] = []

    def flush():
        for q in queue:
            out.append(trace.events[q])
            inserter.burst(q, draws, params.p_ri, out)
        queue.clear()

    for k, event in enumerate(trace.events):
        inserter.admit(k)
        if event.name in catalog.side_effect_set and delay_gate[k] < params.p_r:
            queue.append(k)
            if len(queue) >= params.queue_size:
                flush()
        else:
            out.append(event)
    flush()
    return Trace(id=trace.id, label=trace.label, events=tuple(out))


def apply_profile(trace: Trace, profile: ObfuscationProfile, catalog: Catalog) -> Trace:
    """Run the configured transformations: reordering first, then insertion.

    Each stage draws from its own stream keyed by (profile.seed, trace.id,
    stage), so the same inputs always produce the same output trace.
    """
    result = trace
    counter_start = 0
    if profile.reordering is not None:
        result = apply_reordering(result, profile.reordering, catalog,
                                  stream(profile.seed, trace.id, "reorder"))
        # continue numbering neutralized params where the first stage stopped
        counter_start = sum(1 for e in result.events
                            if e.synthetic and e.name in catalog.side_effect_set)
    if profile.insertion is not None:
        result = apply_insertion(result, profile.insertion, catalog,
                                 stream(profile.seed, trace.id, "insert"),
                                 _counter_start=counter_start)
    return result


def load_profile(path) -> ObfuscationProfile:
    """Read a profile from JSON: {"seed", "insertion"?, "reordering"?}."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "seed" not in raw:
        raise ParseError(f"{path}: expected a JSON object with a 'seed' field")
    try:
        insertion = reordering = None
        if raw.get("insertion") is not None:
            ins = raw["insertion"]
            insertion = InsertionParams(p_i=float(ins["p_i"]), min_i=int(ins["min_i"]),
                                        max_i=int(ins["max_i"]))
        if raw.get("reordering") is not None:
            reo = raw["reordering"]
            reordering = ReorderingParams(
                p_r=float(reo["p_r"]), queue_size=int(reo["queue_size"]),
                p_ri=float(reo["p_ri"]), min_ri=int(reo["min_ri"]), max_ri=int(reo["max_ri"]))
        return ObfuscationProfile(seed=int(raw["seed"]), insertion=insertion,
                                  reordering=reordering)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed profile: {exc}") from exc


def save_profile(profile: ObfuscationProfile, path) -> None:
    doc: dict = {"seed": profile.seed}
    if profile.insertion is not None:
        ins = profile.insertion
        doc["insertion"] = {"p_i": ins.p_i, "min_i": ins.min_i, "max_i": ins.max_i}
    if profile.reordering is not None:
        reo = profile.reordering
        doc["reordering"] = {"p_r": reo.p_r, "queue_size": reo.queue_size,
                             "p_ri": reo.p_ri, "min_ri": reo.min_ri, "max_ri": reo.max_ri}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
