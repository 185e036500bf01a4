"""File formats: JSON containers for matrices and datasets, byte-stable CSV.

Matrices are stored as row-major [re, im] pairs so complex values survive a
round trip bit for bit (json floats use round-trip-exact shortest decimals).
CSV floats are printed with 17 significant digits for the same reason, and
rows always end with a bare newline, so one config and seed produce the same
bytes on every run.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .linalg import ValidationError
from .tomography import Dataset


def matrix_to_record(M: np.ndarray) -> dict:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    entries = [[float(z.real), float(z.imag)] for z in M.reshape(-1)]
    return {"kind": "matrix", "dim": M.shape[0], "entries": entries}


def matrix_from_record(rec: dict) -> np.ndarray:
    dim = int(rec["dim"])
    entries = rec["entries"]
    if len(entries) != dim * dim:
        raise ValidationError(f"matrix record has {len(entries)} entries, expected {dim * dim}")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(dim, dim)


def save_matrix(path, M: np.ndarray) -> None:
    _dump(path, matrix_to_record(M))


def load_matrix(path) -> np.ndarray:
    rec = _load(path)
    if rec.get("kind") != "matrix":
        raise ValidationError(f"{path}: expected a matrix file, got kind {rec.get('kind')!r}")
    return matrix_from_record(rec)


def dataset_to_record(data: Dataset) -> dict:
    M = np.asarray(data.matrices, dtype=complex)
    rec = {
        "kind": "dataset",
        "dim": int(M.shape[1]),
        "n": int(M.shape[0]),
        "has_provenance": bool(data.has_provenance),
        "matrices": [matrix_to_record(M[i])["entries"] for i in range(M.shape[0])],
    }
    if data.has_provenance:
        rec["povm_indices"] = [int(i) for i in data.povm_indices]
        rec["outcome_indices"] = [int(i) for i in data.outcome_indices]
    return rec


def dataset_from_record(rec: dict) -> Dataset:
    dim, n = int(rec["dim"]), int(rec["n"])
    matrices = np.empty((n, dim, dim), dtype=complex)
    for i, entries in enumerate(rec["matrices"]):
        matrices[i] = matrix_from_record({"dim": dim, "entries": entries})
    povm_idx = out_idx = None
    if rec.get("has_provenance"):
        povm_idx = np.array(rec["povm_indices"], dtype=np.int64)
        out_idx = np.array(rec["outcome_indices"], dtype=np.int64)
    return Dataset(matrices=matrices, povm_indices=povm_idx, outcome_indices=out_idx)


def save_dataset(path, data: Dataset) -> None:
    _dump(path, dataset_to_record(data))


def load_dataset(path) -> Dataset:
    rec = _load(path)
    if rec.get("kind") != "dataset":
        raise ValidationError(f"{path}: expected a dataset file, got kind {rec.get('kind')!r}")
    return dataset_from_record(rec)


def save_return_stream(path, returns: np.ndarray) -> None:
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2:
        raise ValidationError(f"expected a (T, D) array, got shape {returns.shape}")
    _dump(path, {
        "kind": "return-stream",
        "dim": int(returns.shape[1]),
        "rounds": int(returns.shape[0]),
        "rows": [[float(x) for x in row] for row in returns],
    })


def load_return_stream(path) -> np.ndarray:
    rec = _load(path)
    if rec.get("kind") != "return-stream":
        raise ValidationError(f"{path}: expected a return-stream file, got kind {rec.get('kind')!r}")
    rows = np.array(rec["rows"], dtype=float)
    if rows.shape != (int(rec["rounds"]), int(rec["dim"])):
        raise ValidationError(f"{path}: rows shape {rows.shape} contradicts the header")
    return rows


def load_payload(path) -> dict:
    """Load any container and return the parsed record with its kind."""
    return _load(path)


def _dump(path, obj: dict) -> None:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a valid container file: {exc}") from exc


def format_cell(value) -> str:
    """One CSV cell: ints verbatim, floats at 17 significant digits."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, columns: list[str], rows) -> None:
    """Fixed column order, '\\n' newlines, round-trip-exact floats."""
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValidationError(f"row has {len(row)} cells, expected {len(columns)}")
        lines.append(",".join(format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(path, config: dict, extra: dict) -> None:
    """Run manifest: config echo and hash, library versions, RNG name.

    The `extra` block carries per-run facts (wall-clock, summaries), so the
    manifest itself is not byte-stable; the CSV and matrix artifacts are.
    """
    from . import __version__
    from .ensembles import RNG_NAME

    record = {
        "kind": "manifest",
        "config": config,
        "config_sha256": config_hash(config),
        "rng": RNG_NAME,
        "package_version": __version__,
        "numpy_version": np.__version__,
    }
    record.update(extra)
    _dump(path, record)
