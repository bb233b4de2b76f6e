"""Versioned save/load of fit bundles.

One JSON document per bundle: format version, the canonical configuration,
all fit records (arrays flattened with shape metadata), and a checksum over
the payload. Loading refuses version mismatches and corrupted payloads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .config import bundle_to_dict, parse_config_dict
from .engine import Bundle, FitRecord, update
from .errors import ConfigError

FORMAT_VERSION = 1


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": list(obj.shape), "data": obj.reshape(-1).tolist()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.asarray(obj["data"], dtype=np.float64).reshape(obj["__ndarray__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def _record_to_doc(record: FitRecord) -> dict:
    return {
        "seed": record.seed,
        "error": record.error,
        "history": _encode(record.history),
        "results": _encode(record.results),
    }


def _record_from_doc(doc: dict) -> FitRecord:
    return FitRecord(
        seed=doc["seed"],
        error=doc.get("error"),
        history=_decode(doc.get("history", {})),
        results=_decode(doc.get("results", {})),
    )


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class SavedBundle:
    """A configuration with the records it produced."""

    config: dict
    records: list = field(default_factory=list)

    @property
    def bundle(self) -> Bundle:
        return parse_config_dict(self.config)

    def updated(self, **overrides) -> "SavedBundle":
        """Replace sections and drop all previous records."""
        new = update(self.bundle, **overrides)
        return SavedBundle(config=bundle_to_dict(new), records=[])


def save_bundle(path: str, bundle: Bundle, records) -> None:
    payload = {
        "config": bundle_to_dict(bundle),
        "records": [_record_to_doc(r) for r in records],
    }
    doc = {
        "format_version": FORMAT_VERSION,
        "checksum": _checksum(payload),
        **payload,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_bundle(path: str) -> SavedBundle:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"bundle format version {version!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    payload = {"config": doc.get("config"), "records": doc.get("records", [])}
    expected = doc.get("checksum")
    actual = _checksum(payload)
    if expected != actual:
        raise ConfigError(f"bundle checksum mismatch: file {expected}, computed {actual}")
    return SavedBundle(
        config=payload["config"],
        records=[_record_from_doc(r) for r in payload["records"]],
    )
