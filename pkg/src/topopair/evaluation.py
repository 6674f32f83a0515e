"""Recall@N evaluation of place-recognition retrieval against ground truth.

A retrieval run is scored per scene: a query counts as recalled at N if
any of its top-N retrieved database images lies within a distance
threshold of the query's ground-truth location. Scene recalls are
combined into a weighted average by query image count.

Distances are Euclidean in each scene's topometric frame; the threshold
is expressed in topometric units and can be scaled per scene via a
units-per-meter factor, since topometric coordinates carry no absolute
scale.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParseError, ValidationError

DEFAULT_N_VALUES = (1, 5, 10, 20)
DEFAULT_THRESHOLD = 10.0

DESCRIPTOR_MAGIC = 0x52435644  # b'DVCR' little-endian
DESCRIPTOR_VERSION = 1


class ImageRole(str, enum.Enum):
    DATABASE = "database"
    QUERY = "query"


@dataclass(frozen=True)
class LocalizedImage:
    """An image with a known topometric location in its scene."""

    image_id: str
    scene_id: str
    location: np.ndarray
    role: ImageRole

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=float)
        if loc.shape != (2,) or not np.all(np.isfinite(loc)):
            raise ValidationError(f"image {self.image_id!r}: location must be a finite 2-vector")
        object.__setattr__(self, "location", loc)


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked database candidates for one query, best first."""

    query_id: str
    ranked_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.ranked_ids:
            raise ValidationError(f"query {self.query_id!r}: ranked list must be non-empty")
        if len(set(self.ranked_ids)) != len(self.ranked_ids):
            raise ValidationError(f"query {self.query_id!r}: ranked list contains duplicates")
        object.__setattr__(self, "ranked_ids", tuple(self.ranked_ids))


def recall_at_n(
    queries: list[LocalizedImage],
    database: list[LocalizedImage],
    results: list[RetrievalResult],
    n_values: tuple[int, ...] = DEFAULT_N_VALUES,
    threshold: float = DEFAULT_THRESHOLD,
) -> dict[int, float]:
    """Recall@N percentages over a set of queries.

    For each N, the percentage of queries for which at least one of the
    top-N retrieved database images lies within ``threshold`` of the
    query's location. Queries with fewer than N ranked results use all
    available results.

    Raises:
        ValidationError: a query without a retrieval result (all missing
            ids are listed), an unknown database id in a ranking, or a
            non-positive threshold.
    """
    if threshold <= 0:
        raise ValidationError(f"threshold must be positive, got {threshold}")
    if not queries:
        raise ValidationError("no queries to evaluate")
    db_locations = {img.image_id: img.location for img in database}
    by_query = {r.query_id: r for r in results}
    missing = [q.image_id for q in queries if q.image_id not in by_query]
    if missing:
        raise ValidationError(f"queries without retrieval results: {', '.join(missing)}")

    recalls: dict[int, float] = {}
    for n in n_values:
        if n < 1:
            raise ValidationError(f"N values must be >= 1, got {n}")
        hits = 0
        for q in queries:
            ranked = by_query[q.image_id].ranked_ids[:n]
            for db_id in ranked:
                if db_id not in db_locations:
                    raise ValidationError(
                        f"query {q.image_id!r}: ranked id {db_id!r} not in database"
                    )
                if np.linalg.norm(q.location - db_locations[db_id]) <= threshold:
                    hits += 1
                    break
        recalls[n] = 100.0 * hits / len(queries)
    return recalls


def weighted_average(per_scene: list[tuple[float, int]]) -> float:
    """Image-count-weighted average of per-scene recalls."""
    if not per_scene:
        raise ValidationError("weighted average of an empty scene list")
    if any(count <= 0 for _, count in per_scene):
        raise ValidationError("scene image counts must be positive")
    total = sum(count for _, count in per_scene)
    return sum(recall * count for recall, count in per_scene) / total


def nearest_neighbor_retrieve(
    query_descriptors: np.ndarray,
    database_descriptors: np.ndarray,
    k: int,
    query_ids: list[str],
    database_ids: list[str],
    metric: str = "euclidean",
) -> list[RetrievalResult]:
    """Exact k-nearest-neighbor retrieval over descriptor vectors.

    Distances are Euclidean or cosine; ties break by database id order so
    the ranking is independent of database insertion order. k larger than
    the database returns the full ranking.
    """
    q = np.asarray(query_descriptors, dtype=np.float64)
    db = np.asarray(database_descriptors, dtype=np.float64)
    if q.ndim != 2 or db.ndim != 2 or q.shape[1] != db.shape[1]:
        raise ValidationError(
            f"descriptor dimension mismatch: queries {q.shape}, database {db.shape}"
        )
    if len(query_ids) != q.shape[0] or len(database_ids) != db.shape[0]:
        raise ValidationError("id list lengths must match descriptor counts")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if metric not in ("euclidean", "cosine"):
        raise ValidationError(f"unknown metric {metric!r}")

    dists = cdist(q, db, metric=metric)
    k = min(k, db.shape[0])
    results = []
    for qi, query_id in enumerate(query_ids):
        order = sorted(range(db.shape[0]), key=lambda j: (dists[qi, j], database_ids[j]))
        results.append(
            RetrievalResult(query_id=query_id, ranked_ids=tuple(database_ids[j] for j in order[:k]))
        )
    return results


@dataclass(frozen=True)
class SceneScore:
    scene_id: str
    recalls: dict[int, float]
    query_count: int


@dataclass(frozen=True)
class EvaluationReport:
    """Per-scene recall table plus the weighted-average row."""

    scenes: tuple[SceneScore, ...]
    n_values: tuple[int, ...]
    threshold: float

    def __post_init__(self):
        if not self.scenes:
            raise ValidationError("report needs at least one scene")
        for s in self.scenes:
            prev = -1.0
            for n in self.n_values:
                r = s.recalls[n]
                if not (0.0 <= r <= 100.0):
                    raise ValidationError(f"scene {s.scene_id!r}: recall {r} out of [0, 100]")
                if r < prev:
                    raise ValidationError(
                        f"scene {s.scene_id!r}: recall not monotone in N at N={n}"
                    )
                prev = r

    @property
    def weighted(self) -> dict[int, float]:
        return {
            n: weighted_average([(s.recalls[n], s.query_count) for s in self.scenes])
            for n in self.n_values
        }

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_values": list(self.n_values),
            "scenes": [
                {
                    "scene_id": s.scene_id,
                    "query_count": s.query_count,
                    "recalls": {str(n): s.recalls[n] for n in self.n_values},
                }
                for s in self.scenes
            ],
            "weighted_average": {str(n): v for n, v in self.weighted.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        """Aligned text table, one row per scene plus the weighted average."""
        headers = ["scene", "queries"] + [f"R@{n}" for n in self.n_values]
        rows = [
            [s.scene_id, str(s.query_count)] + [f"{s.recalls[n]:.1f}" for n in self.n_values]
            for s in self.scenes
        ]
        weighted = self.weighted
        total = sum(s.query_count for s in self.scenes)
        rows.append(
            ["weighted avg", str(total)] + [f"{weighted[n]:.1f}" for n in self.n_values]
        )
        widths = [max(len(headers[c]), *(len(r[c]) for r in rows)) for c in range(len(headers))]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
            "  ".join("-" * w for w in widths),
        ]
        lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
        return "\n".join(lines) + "\n"


def evaluate_scenes(
    images: list[LocalizedImage],
    results: list[RetrievalResult],
    n_values: tuple[int, ...] = DEFAULT_N_VALUES,
    threshold: float = DEFAULT_THRESHOLD,
    units_per_meter: dict[str, float] | None = None,
) -> EvaluationReport:
    """Score retrieval per scene and assemble the report.

    ``units_per_meter`` maps scene ids to the scale between topometric
    units and meters; the effective per-scene threshold is
    ``threshold * units_per_meter`` (default factor 1.0).
    """
    scales = units_per_meter or {}
    scene_ids = sorted({img.scene_id for img in images})
    result_ids = {r.query_id for r in results}
    scores = []
    for scene_id in scene_ids:
        queries = [
            img for img in images if img.scene_id == scene_id and img.role is ImageRole.QUERY
        ]
        database = [
            img for img in images if img.scene_id == scene_id and img.role is ImageRole.DATABASE
        ]
        if not queries:
            continue
        scene_results = [r for r in results if r.query_id in {q.image_id for q in queries}]
        recalls = recall_at_n(
            queries,
            database,
            scene_results,
            n_values=n_values,
            threshold=threshold * scales.get(scene_id, 1.0),
        )
        scores.append(SceneScore(scene_id=scene_id, recalls=recalls, query_count=len(queries)))
    if not scores:
        raise ValidationError("no scene contained query images")
    unused = result_ids - {img.image_id for img in images if img.role is ImageRole.QUERY}
    if unused:
        raise ValidationError(f"results for unknown query ids: {', '.join(sorted(unused))}")
    return EvaluationReport(scenes=tuple(scores), n_values=tuple(n_values), threshold=threshold)


# ---------------------------------------------------------------------------
# File formats (see docs/formats.md)


def read_locations_csv(path: str | Path) -> list[LocalizedImage]:
    """Read the `image_id,scene_id,role,x,y` locations file."""
    images = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                if line != "image_id,scene_id,role,x,y":
                    raise ParseError(
                        "expected header 'image_id,scene_id,role,x,y'", path=str(path), line=1
                    )
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise ParseError(f"expected 5 fields, got {len(fields)}", path=str(path), line=lineno)
            try:
                images.append(
                    LocalizedImage(
                        image_id=fields[0],
                        scene_id=fields[1],
                        role=ImageRole(fields[2]),
                        location=np.array([float(fields[3]), float(fields[4])]),
                    )
                )
            except (ValueError, ValidationError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from None
    seen: set[tuple[str, str, str]] = set()
    for img in images:
        key = (img.scene_id, img.role.value, img.image_id)
        if key in seen:
            raise ValidationError(
                f"duplicate image_id {img.image_id!r} for role {img.role.value} "
                f"in scene {img.scene_id!r}"
            )
        seen.add(key)
    return images


def write_locations_csv(images: list[LocalizedImage], path: str | Path) -> None:
    lines = ["image_id,scene_id,role,x,y"]
    lines += [
        f"{img.image_id},{img.scene_id},{img.role.value},"
        f"{float(img.location[0])!r},{float(img.location[1])!r}"
        for img in images
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_descriptors(path: str | Path, ids: list[str], descriptors: np.ndarray) -> None:
    """Write a descriptor matrix in the binary layout plus the id sidecar.

    Header: magic, version, count, dimension as little-endian uint32,
    followed by count*dimension little-endian float32 values. The sidecar
    id list is written next to the file as ``<path>.ids``, one id per line.
    """
    mat = np.ascontiguousarray(descriptors, dtype="<f4")
    if mat.ndim != 2:
        raise ValidationError(f"descriptors must be a 2D matrix, got shape {mat.shape}")
    if len(ids) != mat.shape[0]:
        raise ValidationError("id count must match descriptor count")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IIII", DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION, *mat.shape))
        fh.write(mat.tobytes())
    Path(str(path) + ".ids").write_text("\n".join(ids) + "\n", encoding="utf-8")


def read_descriptors(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a binary descriptor file and its id sidecar."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16:
        raise ParseError("descriptor file too short for header", path=str(path))
    magic, version, count, dim = struct.unpack_from("<IIII", data)
    if magic != DESCRIPTOR_MAGIC:
        raise ParseError(f"bad magic 0x{magic:08x}", path=str(path))
    if version != DESCRIPTOR_VERSION:
        raise ParseError(f"unsupported version {version}", path=str(path))
    expected = 16 + count * dim * 4
    if len(data) != expected:
        raise ParseError(
            f"size mismatch: header implies {expected} bytes, file has {len(data)}",
            path=str(path),
        )
    mat = np.frombuffer(data, dtype="<f4", offset=16).reshape(count, dim)
    ids_path = Path(str(path) + ".ids")
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise ParseError(
            f"sidecar lists {len(ids)} ids but file holds {count} descriptors",
            path=str(ids_path),
        )
    return ids, mat.astype(np.float64)


def read_results(path: str | Path) -> list[RetrievalResult]:
    """Read the results file: per line, a query id then its ranked ids."""
    results = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) < 2:
                raise ParseError(
                    "expected a query id followed by ranked database ids",
                    path=str(path),
                    line=lineno,
                )
            try:
                results.append(RetrievalResult(query_id=fields[0], ranked_ids=tuple(fields[1:])))
            except ValidationError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from None
    return results


def write_results(results: list[RetrievalResult], path: str | Path) -> None:
    lines = [f"{r.query_id} {' '.join(r.ranked_ids)}" for r in results]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
