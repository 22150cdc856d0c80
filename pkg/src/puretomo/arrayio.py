"""File formats: JSON manifests plus raw complex binary payloads.

A manifest is a small JSON document {kind, dims, dtype, data_file, sha256}
next to a binary file of interleaved little-endian float64 (re, im) pairs
in row-major order.  Record files carry their acquisition metadata
(subset, shots, seed, basis) as extra manifest fields.
"""

import hashlib
import itertools
import json
from pathlib import Path

import numpy as np

from .core import DensityOperator, PureState, SystemShape
from .errors import ManifestError
from .measure import EXACT, ExpectationRecord

DTYPE = "c128"


def _sha256(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _write_payload(manifest_path, kind, dims, data, extra=None):
    manifest_path = Path(manifest_path)
    data_file = manifest_path.with_suffix(".bin")
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.complex128)).astype("<c16")
    data_file.write_bytes(arr.tobytes())
    doc = {
        "kind": kind,
        "dims": [int(d) for d in dims],
        "dtype": DTYPE,
        "data_file": data_file.name,
        "sha256": _sha256(data_file),
    }
    if extra:
        doc.update(extra)
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return manifest_path


def _read_payload(manifest_path, expect_kind=None):
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{manifest_path}: not valid JSON: {exc}") from exc
    for key in ("kind", "dims", "dtype", "data_file", "sha256"):
        if key not in doc:
            raise ManifestError(f"{manifest_path}: missing manifest field {key!r}")
    if doc["dtype"] != DTYPE:
        raise ManifestError(f"{manifest_path}: unsupported dtype {doc['dtype']!r}")
    if expect_kind is not None and doc["kind"] != expect_kind:
        raise ManifestError(f"{manifest_path}: expected kind {expect_kind!r}, got {doc['kind']!r}")
    data_file = manifest_path.parent / doc["data_file"]
    digest = _sha256(data_file)
    if digest != doc["sha256"]:
        raise ManifestError(f"{manifest_path}: sha256 mismatch for {data_file.name}")
    raw = np.frombuffer(data_file.read_bytes(), dtype="<c16").astype(np.complex128)
    return doc, raw


def save_state(path, psi):
    return _write_payload(path, "pure", psi.shape.dims, psi.amplitudes)


def load_state(path):
    doc, raw = _read_payload(path, expect_kind="pure")
    shape = SystemShape(tuple(doc["dims"]))
    if raw.size != shape.total:
        raise ManifestError(f"{path}: payload length {raw.size} does not match dims {doc['dims']}")
    return PureState(shape, raw)


def save_density(path, rho, extra=None):
    return _write_payload(path, "density", rho.shape.dims, rho.matrix, extra=extra)


def load_density(path):
    doc, raw = _read_payload(path, expect_kind="density")
    shape = SystemShape(tuple(doc["dims"]))
    n = shape.total
    if raw.size != n * n:
        raise ManifestError(f"{path}: payload length {raw.size} does not match dims {doc['dims']}")
    mat = raw.reshape(n, n)
    return DensityOperator(shape, mat, trace=float(np.trace(mat).real)), doc


def save_records(path, records, qudit_dim):
    if not records:
        raise ManifestError("cannot save an empty record list")
    subset = records[0].subset
    shots = records[0].shots
    seed = records[0].seed
    order = sorted(records, key=lambda r: r.operator_index)
    values = np.array([r.value for r in order], dtype=np.complex128)
    extra = {
        "subset": list(subset),
        "qudit_dim": int(qudit_dim),
        "shots": shots if shots == EXACT else int(shots),
        "seed": int(seed),
        "basis": "gell-mann",
    }
    return _write_payload(path, "records", [qudit_dim] * len(subset), values, extra=extra)


def load_records(path):
    doc, raw = _read_payload(path, expect_kind="records")
    for key in ("subset", "qudit_dim", "shots", "seed"):
        if key not in doc:
            raise ManifestError(f"{path}: records manifest missing field {key!r}")
    d = int(doc["qudit_dim"])
    subset = tuple(int(i) for i in doc["subset"])
    k = len(subset)
    if raw.size != (d * d) ** k:
        raise ManifestError(
            f"{path}: {raw.size} values do not cover the complete product basis of {k} sites")
    shots = doc["shots"] if doc["shots"] == EXACT else int(doc["shots"])
    records = [
        ExpectationRecord(subset=subset, operator_index=tuple(index),
                          value=float(raw[i].real), shots=shots, seed=int(doc["seed"]))
        for i, index in enumerate(itertools.product(range(d * d), repeat=k))
    ]
    return records, d
