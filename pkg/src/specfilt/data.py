"""Dataset directory IO.

Layout (UTF-8, LF newlines, tab separators):
  edges.tsv     one "src<TAB>dst" per line, 0-based indices
  features.tsv  one row per node, d tab-separated decimal floats
  labels.tsv    one "node<TAB>label" per line, one line per node
  splits.json   {"train": [...], "val": [...], "test": [...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import Dataset, build_graph
from .serialize import format_float


class DatasetFormatError(ValueError):
    """Malformed or inconsistent dataset directory."""


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetFormatError(f"missing file: {path}")
    text = path.read_text(encoding="utf-8")
    return [ln for ln in text.split("\n") if ln != ""]


def load_dataset(directory: str | Path) -> Dataset:
    """Load and validate a dataset directory.

    Every malformed line is reported with its file and line number; split
    overlaps name the duplicated node index.
    """
    directory = Path(directory)
    feat_lines = _read_lines(directory / "features.tsv")
    n = len(feat_lines)
    if n == 0:
        raise DatasetFormatError(f"{directory / 'features.tsv'}: no rows")
    width = len(feat_lines[0].split("\t"))
    features = np.empty((n, width))
    for i, line in enumerate(feat_lines):
        parts = line.split("\t")
        if len(parts) != width:
            raise DatasetFormatError(
                f"features.tsv line {i + 1}: expected {width} columns, got {len(parts)}")
        try:
            features[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise DatasetFormatError(f"features.tsv line {i + 1}: {exc}") from exc

    edges = []
    for i, line in enumerate(_read_lines(directory / "edges.tsv")):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetFormatError(f"edges.tsv line {i + 1}: expected src<TAB>dst")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise DatasetFormatError(f"edges.tsv line {i + 1}: {exc}") from exc
    try:
        graph = build_graph(n, edges)
    except ValueError as exc:
        raise DatasetFormatError(f"edges.tsv: {exc}") from exc

    labels = np.full(n, -1, dtype=np.int64)
    for i, line in enumerate(_read_lines(directory / "labels.tsv")):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetFormatError(f"labels.tsv line {i + 1}: expected node<TAB>label")
        try:
            node, label = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise DatasetFormatError(f"labels.tsv line {i + 1}: {exc}") from exc
        if not (0 <= node < n):
            raise DatasetFormatError(f"labels.tsv line {i + 1}: node {node} out of range")
        if labels[node] != -1:
            raise DatasetFormatError(f"labels.tsv line {i + 1}: duplicate node {node}")
        if label < 0:
            raise DatasetFormatError(f"labels.tsv line {i + 1}: negative label")
        labels[node] = label
    missing = np.where(labels < 0)[0]
    if missing.size:
        raise DatasetFormatError(f"labels.tsv: node {missing[0]} has no label")

    splits_path = directory / "splits.json"
    if not splits_path.is_file():
        raise DatasetFormatError(f"missing file: {splits_path}")
    try:
        raw = json.loads(splits_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"splits.json: {exc}") from exc
    splits = {}
    for name in ("train", "val", "test"):
        if name not in raw:
            raise DatasetFormatError(f"splits.json: missing key '{name}'")
        splits[name] = np.asarray(sorted(int(i) for i in raw[name]), dtype=np.int64)

    ds = Dataset(graph=graph, features=features, labels=labels, splits=splits)
    try:
        ds.validate()
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from exc
    return ds


def save_dataset(dataset: Dataset, directory: str | Path) -> list[Path]:
    """Write the four dataset files; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []

    p = directory / "edges.tsv"
    pairs = dataset.graph.edge_pairs()
    p.write_text("".join(f"{u}\t{v}\n" for u, v in pairs), encoding="utf-8")
    paths.append(p)

    p = directory / "features.tsv"
    p.write_text("".join(
        "\t".join(format_float(x) for x in row) + "\n"
        for row in dataset.features), encoding="utf-8")
    paths.append(p)

    p = directory / "labels.tsv"
    p.write_text("".join(f"{i}\t{y}\n" for i, y in enumerate(dataset.labels)),
                 encoding="utf-8")
    paths.append(p)

    p = directory / "splits.json"
    blob = {k: dataset.splits[k].tolist() for k in ("train", "val", "test")}
    p.write_text(json.dumps(blob, indent=1) + "\n", encoding="utf-8")
    paths.append(p)
    return paths
