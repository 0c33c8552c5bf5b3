"""Round-trip-safe serialization: JSON with 17-significant-digit floats,
model checkpoints, eigensystem cache files, and run manifests."""

from __future__ import annotations

import hashlib
import struct
import time
from pathlib import Path

import numpy as np

from .filterbank import FilterBank, PartitionSpec
from .model import ModelParams
from .spectral import EigenSystem

CHECKPOINT_SCHEMA_VERSION = 1
EIGEN_MAGIC = b"SPECFILT-EIG\x00\x00\x00\x00"


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any IEEE double."""
    if not np.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(float(x), ".17g")


def dumps_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats rendered at 17 significant digits.

    Standard json.dumps renders floats with repr, which is shortest-form
    rather than fixed-precision; this writer keeps the output stable across
    runs and platforms.
    """
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, np.ndarray):
        return dumps_json(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_json(v, indent + 2) for v in obj]
        if indent >= 0 and any(isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            inner = (",\n" + pad + "  ").join(items)
            return "[\n" + pad + "  " + inner + "\n" + pad + "]"
        return "[" + ", ".join(items) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{dumps_json(str(k))}: {dumps_json(v, indent + 2)}'
                 for k, v in obj.items()]
        inner = (",\n" + pad + "  ").join(items)
        return "{\n" + pad + "  " + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps_json(obj) + "\n", encoding="utf-8")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# -- checkpoints --------------------------------------------------------


def checkpoint_to_dict(params: ModelParams, seed: int) -> dict:
    part = params.filter.partition
    return {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "dims": list(params.dims),
        "w1": params.w1, "b1": params.b1,
        "w2": params.w2 if params.w2 is not None else [],
        "b2": params.b2 if params.b2 is not None else [],
        "partition": {
            "source_len": part.source_len,
            "k_low": part.k_low,
            "k_high": part.k_high,
            "low_bins": [list(b) for b in part.low_bins],
            "high_bins": [list(b) for b in part.high_bins],
            "low_boundaries": [list(b) for b in part.low_boundaries],
            "high_boundaries": [list(b) for b in part.high_boundaries],
        },
        "low_coeffs": [c for c in params.filter.low_coeffs],
        "high_coeffs": [c for c in params.filter.high_coeffs],
        "gpr_coeffs": params.filter.gpr_coeffs,
        "etas": [params.filter.eta_low, params.filter.eta_high,
                 params.filter.eta_gpr],
        "dropout": params.dropout,
        "linear": params.linear,
        "seed": seed,
    }


def save_checkpoint(path: str | Path, params: ModelParams, seed: int) -> None:
    write_json(path, checkpoint_to_dict(params, seed))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, int]:
    import json

    blob = json.loads(Path(path).read_text(encoding="utf-8"))
    if blob.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema {blob.get('schema_version')!r}")
    part = PartitionSpec(
        source_len=int(blob["partition"]["source_len"]),
        k_low=int(blob["partition"]["k_low"]),
        k_high=int(blob["partition"]["k_high"]),
        low_bins=tuple(tuple(int(x) for x in b) for b in blob["partition"]["low_bins"]),
        high_bins=tuple(tuple(int(x) for x in b) for b in blob["partition"]["high_bins"]),
        low_boundaries=tuple(tuple(float(x) for x in b)
                             for b in blob["partition"]["low_boundaries"]),
        high_boundaries=tuple(tuple(float(x) for x in b)
                              for b in blob["partition"]["high_boundaries"]),
    )
    fb = FilterBank(
        partition=part,
        low_coeffs=[np.asarray(c, dtype=np.float64) for c in blob["low_coeffs"]],
        high_coeffs=[np.asarray(c, dtype=np.float64) for c in blob["high_coeffs"]],
        gpr_coeffs=np.asarray(blob["gpr_coeffs"], dtype=np.float64),
        eta_low=float(blob["etas"][0]), eta_high=float(blob["etas"][1]),
        eta_gpr=float(blob["etas"][2]))
    linear = bool(blob.get("linear", False))
    w2 = np.asarray(blob["w2"], dtype=np.float64) if not linear else None
    b2 = np.asarray(blob["b2"], dtype=np.float64) if not linear else None
    params = ModelParams(
        dims=tuple(int(x) for x in blob["dims"]),
        w1=np.asarray(blob["w1"], dtype=np.float64),
        b1=np.asarray(blob["b1"], dtype=np.float64),
        w2=w2, b2=b2, filter=fb,
        dropout=float(blob.get("dropout", 0.0)), linear=linear)
    params.validate()
    return params, int(blob["seed"])


# -- eigensystem cache ---------------------------------------------------


def write_eigen_cache(path: str | Path, es: EigenSystem) -> None:
    """Binary cache: 16-byte magic, little-endian int64 (n, k_low, k_high),
    eigenvalues, then column-major eigenvectors, all float64."""
    k_low = es.k_low if es.k_low is not None else len(es)
    k_high = es.k_high if es.k_high is not None else 0
    with open(path, "wb") as f:
        f.write(EIGEN_MAGIC)
        f.write(struct.pack("<qqq", es.source_n, k_low, k_high))
        f.write(es.eigenvalues.astype("<f8").tobytes())
        f.write(np.asfortranarray(es.eigenvectors.astype("<f8")).tobytes(order="F"))


def read_eigen_cache(path: str | Path) -> EigenSystem:
    data = Path(path).read_bytes()
    if len(data) < 16 + 24 or data[:16] != EIGEN_MAGIC:
        raise ValueError(f"{path}: not an eigensystem cache (bad magic header)")
    n, k_low, k_high = struct.unpack("<qqq", data[16:40])
    k = k_low + k_high
    need = 40 + 8 * k + 8 * n * k
    if len(data) != need or k < 0 or k > n:
        raise ValueError(f"{path}: truncated or inconsistent eigensystem cache")
    vals = np.frombuffer(data, dtype="<f8", count=k, offset=40).copy()
    vecs = np.frombuffer(data, dtype="<f8", count=n * k, offset=40 + 8 * k)
    vecs = vecs.reshape((n, k), order="F").copy()
    return EigenSystem(vals, vecs, source_n=int(n), complete=(k == n),
                       k_low=int(k_low), k_high=int(k_high))


# -- run manifests -------------------------------------------------------


def make_manifest(command: str, config: dict, inputs: dict[str, str],
                  outputs: dict[str, str], seed, version: str,
                  started: float, finished: float) -> dict:
    return {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "version": version,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(finished)),
    }
