"""On-disk index artifacts with deterministic bytes.

Rebuilding from unchanged inputs must produce byte-identical files, so
everything is serialized canonically: records as sorted-key JSONL, the BM25
index and vector stores in a small versioned binary container (magic +
header JSON + payload). Vector payloads are raw C-order float64 bytes;
the BM25 payload is zlib-compressed canonical JSON.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .corpus import Record
from .dense import VectorStore
from .lexical import InvertedIndex, _prepare_arrays

MAGIC = b"HYSTBIN1"


class ArtifactError(RuntimeError):
    """Raised when an artifact file is missing, corrupt, or the wrong kind."""


def _canonical_json(data: object) -> bytes:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode(
        "utf-8"
    )


def _write_container(path: Path, header: dict, payload: bytes) -> None:
    header_bytes = _canonical_json(header)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def _read_container(path: Path, kind: str) -> tuple[dict, bytes]:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError:
        raise ArtifactError(f"missing artifact {path}; run 'ingest' first") from None
    if blob[: len(MAGIC)] != MAGIC:
        raise ArtifactError(f"{path}: not a recognized artifact file")
    (header_len,) = struct.unpack_from("<I", blob, len(MAGIC))
    start = len(MAGIC) + 4
    header = json.loads(blob[start : start + header_len])
    if header.get("kind") != kind:
        raise ArtifactError(f"{path}: expected a {kind} artifact, found {header.get('kind')!r}")
    return header, blob[start + header_len :]


def save_records(path: str | Path, records: list[Record]) -> None:
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {"id": r.id, "attrs": r.attrs, "text": r.text},
                sort_keys=True,
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_records(path: str | Path) -> list[Record]:
    records = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ArtifactError(f"missing artifact {path}; run 'ingest' first") from None
    for line in text.splitlines():
        if line.strip():
            row = json.loads(line)
            records.append(Record(id=row["id"], attrs=row["attrs"], text=row["text"]))
    return records


def save_bm25(path: str | Path, index: InvertedIndex) -> None:
    header = {"kind": "bm25-index", "version": 1, "k1": index.k1, "b": index.b}
    body = {
        "doc_lengths": index.doc_lengths,
        "postings": {term: [[d, tf] for d, tf in plist] for term, plist in index.postings.items()},
    }
    _write_container(Path(path), header, zlib.compress(_canonical_json(body), 6))


def load_bm25(path: str | Path) -> InvertedIndex:
    header, payload = _read_container(Path(path), "bm25-index")
    if header["version"] != 1:
        raise ArtifactError(f"{path}: unsupported bm25-index version {header['version']}")
    body = json.loads(zlib.decompress(payload))
    doc_lengths = {d: int(n) for d, n in body["doc_lengths"].items()}
    postings = {
        term: [(d, int(tf)) for d, tf in plist] for term, plist in body["postings"].items()
    }
    doc_count = len(doc_lengths)
    index = InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=(sum(doc_lengths.values()) / doc_count if doc_count else 0.0),
        doc_count=doc_count,
        k1=header["k1"],
        b=header["b"],
    )
    _prepare_arrays(index)
    return index


def save_vector_store(path: str | Path, store: VectorStore, embedder_id: str) -> None:
    matrix, _ = store._ensure_arrays()
    header = {
        "kind": "vector-store",
        "version": 1,
        "dimension": store.dimension,
        "embedder_id": embedder_id,
        "ids": store.ids,
    }
    payload = np.ascontiguousarray(matrix, dtype=np.float64).tobytes()
    _write_container(Path(path), header, payload)


def load_vector_store(
    path: str | Path,
    attrs_by_id: dict[str, dict],
) -> tuple[VectorStore, str]:
    header, payload = _read_container(Path(path), "vector-store")
    if header["version"] != 1:
        raise ArtifactError(f"{path}: unsupported vector-store version {header['version']}")
    dim = int(header["dimension"])
    ids = header["ids"]
    matrix = np.frombuffer(payload, dtype=np.float64).reshape(len(ids), dim)
    store = VectorStore(dimension=dim)
    for i, doc_id in enumerate(ids):
        # Vectors were unit-normalized before saving; re-normalizing would
        # perturb the stored bytes, so append rows directly.
        store._pos[doc_id] = len(store._ids)
        store._ids.append(doc_id)
        store._attrs.append(attrs_by_id.get(doc_id, {}))
        store._rows.append(matrix[i].copy())
    return store, header["embedder_id"]
