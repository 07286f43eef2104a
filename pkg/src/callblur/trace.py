"""Trace data model and on-disk formats.

A trace is the ordered sequence of system-call events a sample produced.
Events carry a name, opaque parameter strings, and a `synthetic` flag
marking events injected by an obfuscation transformation.

File formats:
  * trace file: JSON Lines, one event per line
      {"name": str, "params": [str, ...], "synthetic": bool}
    (missing params -> [], missing synthetic -> false)
  * corpus manifest: JSON
      {"traces": [{"id": str, "label": "malware"|"goodware", "path": str}, ...]}
    with paths resolved relative to the manifest's directory.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

from .errors import EmptyFileWarning, IoError, ParseError, ValidationError

MALWARE = "malware"
GOODWARE = "goodware"
LABELS = (MALWARE, GOODWARE)


@dataclass(frozen=True)
class SyscallEvent:
    name: str
    params: tuple[str, ...] = ()
    synthetic: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValidationError("event name must be non-empty")
        if not isinstance(self.params, tuple):
            object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class Trace:
    id: str
    label: str
    events: tuple[SyscallEvent, ...]

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"trace {self.id!r}: label must be one of {LABELS}")
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class Corpus:
    traces: list[Trace] = field(default_factory=list)

    def __post_init__(self):
        ids = [t.id for t in self.traces]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate trace ids in corpus: {dupes}")

    def __len__(self) -> int:
        return len(self.traces)

    def by_label(self, label: str) -> list[Trace]:
        return [t for t in self.traces if t.label == label]

    def ids(self) -> set[str]:
        return {t.id for t in self.traces}


def project_names(trace: Trace) -> list[str]:
    """The name sequence of a trace; synthetic and original events alike."""
    return [e.name for e in trace.events]


def _parse_event(doc, path, lineno: int) -> SyscallEvent:
    if not isinstance(doc, dict):
        raise ParseError(f"{path}:{lineno}: event must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ParseError(f"{path}:{lineno}: missing or empty 'name' field")
    params = doc.get("params", [])
    if not isinstance(params, list) or not all(isinstance(p, str) for p in params):
        raise ParseError(f"{path}:{lineno}: 'params' must be a list of strings")
    synthetic = doc.get("synthetic", False)
    if not isinstance(synthetic, bool):
        raise ParseError(f"{path}:{lineno}: 'synthetic' must be a boolean")
    return SyscallEvent(name=name, params=tuple(params), synthetic=synthetic)


def read_trace(path, id: str, label: str) -> Trace:
    """Read a JSONL event file. Empty files yield an empty trace plus a warning."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        events.append(_parse_event(doc, path, lineno))
    if not events:
        warnings.warn(f"{path}: trace file has no events", EmptyFileWarning, stacklevel=2)
    return Trace(id=id, label=label, events=tuple(events))


def write_trace(trace: Trace, path) -> None:
    """Write a trace as JSONL. Serialization is deterministic byte-for-byte."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for e in trace.events:
                fh.write(json.dumps(
                    {"name": e.name, "params": list(e.params), "synthetic": e.synthetic},
                    separators=(",", ":"),
                ))
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_corpus(manifest_path) -> Corpus:
    """Load a corpus from a manifest file plus the trace files it points to."""
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: not valid JSON: {exc}") from exc
    entries = raw.get("traces") if isinstance(raw, dict) else None
    if not isinstance(entries, list):
        raise ParseError(f"{manifest_path}: expected an object with a 'traces' list")
    base = os.path.dirname(os.path.abspath(manifest_path))
    traces = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or not {"id", "label", "path"} <= entry.keys():
            raise ParseError(f"{manifest_path}: traces[{i}] needs id, label and path")
        if entry["label"] not in LABELS:
            raise ParseError(f"{manifest_path}: traces[{i}]: bad label {entry['label']!r}")
        trace_path = entry["path"]
        if not os.path.isabs(trace_path):
            trace_path = os.path.join(base, trace_path)
        traces.append(read_trace(trace_path, id=entry["id"], label=entry["label"]))
    return Corpus(traces=traces)


def write_corpus(corpus: Corpus, out_dir) -> str:
    """Write manifest.json plus one trace file per trace under `out_dir`.

    Returns the manifest path.
    """
    traces_dir = os.path.join(out_dir, "traces")
    try:
        os.makedirs(traces_dir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {traces_dir}: {exc}") from exc
    entries = []
    for t in corpus.traces:
        rel = os.path.join("traces", f"{t.id}.jsonl")
        write_trace(t, os.path.join(out_dir, rel))
        entries.append({"id": t.id, "label": t.label, "path": rel})
    manifest_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump({"traces": entries}, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {manifest_path}: {exc}") from exc
    return manifest_path
