"""The call-name universe and the behavioral sets that gate obfuscation.

A catalog carries the alphabet of system-call names together with two
subsets: the side-effect set (calls that modify external state, e.g. file
writes; these are the only calls that get delayed by reordering and that
need parameter neutralization when inserted) and the unique-resource set
(calls touching singleton resources, excluded from the insertion pool).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Catalog:
    alphabet: tuple[str, ...]
    side_effect_set: frozenset[str] = field(default_factory=frozenset)
    unique_resource_set: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.alphabet:
            raise ValidationError("catalog alphabet is empty")
        if len(set(self.alphabet)) != len(self.alphabet):
            dupes = sorted({n for n in self.alphabet if self.alphabet.count(n) > 1})
            raise ValidationError(f"duplicate names in alphabet: {dupes}")
        for name in self.alphabet:
            if not isinstance(name, str) or not name:
                raise ValidationError("alphabet names must be non-empty strings")
        names = set(self.alphabet)
        for label, subset in (("side_effect", self.side_effect_set),
                              ("unique_resource", self.unique_resource_set)):
            missing = sorted(subset - names)
            if missing:
                raise ValidationError(f"{label} names not in alphabet: {missing}")

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.alphabet)}

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def code_of(self, name: str) -> int:
        """Integer code of a name (its position in the alphabet)."""
        return self._index[name]

    def encode(self, names) -> np.ndarray:
        """Map a name sequence to an int64 code array. KeyError on unknown names."""
        idx = self._index
        return np.fromiter((idx[n] for n in names), dtype=np.int64, count=len(names))


def is_insertable(catalog: Catalog, name: str) -> bool:
    """True iff `name` is in the alphabet and not tied to a unique resource."""
    return name in catalog and name not in catalog.unique_resource_set


def load_catalog(path) -> Catalog:
    """Load and validate a catalog from a JSON file.

    Expected shape: {"alphabet": [...], "side_effect": [...], "unique_resource": [...]};
    the two subset keys may be omitted and default to empty.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: expected a JSON object")
    alphabet = raw.get("alphabet")
    if not isinstance(alphabet, list):
        raise ParseError(f"{path}: 'alphabet' must be a list of names")
    for key in ("side_effect", "unique_resource"):
        if key in raw and not isinstance(raw[key], list):
            raise ParseError(f"{path}: '{key}' must be a list of names")
    return Catalog(
        alphabet=tuple(alphabet),
        side_effect_set=frozenset(raw.get("side_effect", [])),
        unique_resource_set=frozenset(raw.get("unique_resource", [])),
    )


def save_catalog(catalog: Catalog, path) -> None:
    doc = {
        "alphabet": list(catalog.alphabet),
        "side_effect": sorted(catalog.side_effect_set),
        "unique_resource": sorted(catalog.unique_resource_set),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# Desk-scale default: 20 generic call names. Only set membership matters to the
# transformations, so the names are placeholders rather than any real OS table.
DEFAULT_ALPHABET = (
    "open", "read", "write", "close", "socket", "send", "recv", "connect",
    "createfile", "deletefile", "regread", "regwrite", "alloc", "free",
    "query", "getinfo", "sleep", "gettime", "enumproc", "loadlib",
)
DEFAULT_SIDE_EFFECT = frozenset({"write", "send", "createfile", "deletefile", "regwrite"})


def default_catalog() -> Catalog:
    """The catalog used by the synthetic corpus and the acceptance suite."""
    return Catalog(alphabet=DEFAULT_ALPHABET, side_effect_set=DEFAULT_SIDE_EFFECT)
