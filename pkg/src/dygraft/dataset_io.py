"""Dataset directory format.

A dynamic graph is a directory with a ``manifest`` plus one subdirectory per
snapshot::

    manifest            key = value lines (domain_tag, T, feature_dim,
                        class_count, timestamps)
    t0/edges.csv        one "u,v" row per undirected edge, u < v
    t0/features.csv     one row of feature_dim reals per node
    t0/labels.csv       "node,label" rows; file absent when unlabeled
    t1/...

Node indices are 0-based. Reals are written with 17 significant digits so a
load/save round trip is byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .graphs import DomainPair, DynamicGraph, Snapshot


class DatasetFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dynamic_graph(g: DynamicGraph, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = [
        f"domain_tag = {g.domain_tag}",
        f"T = {len(g.snapshots)}",
        f"feature_dim = {g.feature_dim}",
        f"class_count = {g.class_count}",
        "timestamps = " + ",".join(_fmt(t) for t in g.timestamps),
    ]
    (root / "manifest").write_text("\n".join(manifest) + "\n")

    for i, snap in enumerate(g.snapshots):
        sdir = root / f"t{i}"
        sdir.mkdir(exist_ok=True)
        edges = sorted((int(u), int(v)) for u, v in snap.edges)
        (sdir / "edges.csv").write_text(
            "".join(f"{u},{v}\n" for u, v in edges))
        (sdir / "features.csv").write_text(
            "".join(",".join(_fmt(x) for x in row) + "\n" for row in snap.features))
        labels_path = sdir / "labels.csv"
        if snap.labels:
            rows = sorted(snap.labels.items())
            labels_path.write_text("".join(f"{n},{c}\n" for n, c in rows))
        elif labels_path.exists():
            labels_path.unlink()


def _parse_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DatasetFormatError(f"{path}:{ln}: expected 'key = value'")
        entries[key.strip()] = value.strip()
    for required in ("domain_tag", "T", "feature_dim", "class_count", "timestamps"):
        if required not in entries:
            raise DatasetFormatError(f"{path}: missing manifest key '{required}'")
    return entries


def load_dynamic_graph(path: str | Path) -> DynamicGraph:
    root = Path(path)
    manifest_path = root / "manifest"
    if not manifest_path.exists():
        raise DatasetFormatError(f"{root}: no manifest file")
    entries = _parse_manifest(manifest_path)
    try:
        t_count = int(entries["T"])
        feature_dim = int(entries["feature_dim"])
        class_count = int(entries["class_count"])
        timestamps = [float(x) for x in entries["timestamps"].split(",")]
    except ValueError as exc:
        raise DatasetFormatError(f"{manifest_path}: {exc}") from exc
    if len(timestamps) != t_count:
        raise DatasetFormatError(
            f"{manifest_path}: T = {t_count} but {len(timestamps)} timestamps")

    snaps = []
    for i in range(t_count):
        sdir = root / f"t{i}"
        feat_path = sdir / "features.csv"
        if not feat_path.exists():
            raise DatasetFormatError(f"{feat_path}: missing")
        features = _read_features(feat_path, feature_dim)
        n = features.shape[0]
        edges = _read_edges(sdir / "edges.csv", n)
        labels = _read_labels(sdir / "labels.csv", n, class_count)
        snaps.append(Snapshot(node_count=n, edges=edges, features=features,
                              timestamp=timestamps[i], labels=labels))
    return DynamicGraph(snapshots=tuple(snaps), feature_dim=feature_dim,
                        class_count=class_count, domain_tag=entries["domain_tag"])


def _read_features(path: Path, feature_dim: int) -> np.ndarray:
    rows = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != feature_dim:
            raise DatasetFormatError(
                f"{path}:{ln}: {len(parts)} values, expected {feature_dim}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{ln}: {exc}") from exc
    return np.array(rows, dtype=np.float64).reshape(-1, feature_dim)


def _read_edges(path: Path, node_count: int) -> np.ndarray:
    if not path.exists():
        return np.zeros((0, 2), dtype=np.int64)
    edges = []
    seen = set()
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            u_s, v_s = line.split(",")
            u, v = int(u_s), int(v_s)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{ln}: expected 'u,v'") from exc
        if u >= v:
            raise DatasetFormatError(
                f"{path}:{ln}: edge ({u}, {v}) violates u < v; directed or "
                f"duplicated input is rejected")
        if not 0 <= u < node_count or not 0 <= v < node_count:
            raise DatasetFormatError(f"{path}:{ln}: endpoint outside [0, {node_count})")
        if (u, v) in seen:
            raise DatasetFormatError(f"{path}:{ln}: duplicate edge ({u}, {v})")
        seen.add((u, v))
        edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _read_labels(path: Path, node_count: int, class_count: int) -> dict[int, int]:
    if not path.exists():
        return {}
    labels: dict[int, int] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            n_s, c_s = line.split(",")
            node, cls = int(n_s), int(c_s)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{ln}: expected 'node,label'") from exc
        if not 0 <= node < node_count:
            raise DatasetFormatError(f"{path}:{ln}: node {node} outside [0, {node_count})")
        if not 0 <= cls < class_count:
            raise DatasetFormatError(f"{path}:{ln}: class {cls} outside [0, {class_count})")
        if node in labels:
            raise DatasetFormatError(f"{path}:{ln}: node {node} labeled twice")
        labels[node] = cls
    return labels


def save_domain_pair(pair: DomainPair, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    save_dynamic_graph(pair.source, root / "source")
    save_dynamic_graph(pair.target, root / "target")
    lines = [f"{int(v)},few_shot_train" for v in pair.few_shot_train]
    lines += [f"{int(v)},held_out_eval" for v in pair.held_out_eval]
    (root / "split.csv").write_text("\n".join(lines) + "\n")


def load_domain_pair(path: str | Path) -> DomainPair:
    root = Path(path)
    source = load_dynamic_graph(root / "source")
    target = load_dynamic_graph(root / "target")
    split_path = root / "split.csv"
    if not split_path.exists():
        raise DatasetFormatError(f"{split_path}: missing")
    few_shot, held_out = [], []
    for ln, line in enumerate(split_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            n_s, subset = line.split(",")
            node = int(n_s)
        except ValueError as exc:
            raise DatasetFormatError(f"{split_path}:{ln}: expected 'node,subset'") from exc
        if subset == "few_shot_train":
            few_shot.append(node)
        elif subset == "held_out_eval":
            held_out.append(node)
        else:
            raise DatasetFormatError(f"{split_path}:{ln}: unknown subset '{subset}'")
    return DomainPair(source=source, target=target,
                      few_shot_train=np.array(few_shot, dtype=np.int64),
                      held_out_eval=np.array(held_out, dtype=np.int64))
