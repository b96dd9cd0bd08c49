"""Loading, aligning, validating and writing tables and model files.

Embedding table format: UTF-8 text, one row per entity, fields separated by
a single tab: the entity id, then d decimal floats (17 significant digits on
write, so values round-trip exactly). An optional first line ``#dim=<d>``
pins the dimension.

Label file: ``id<TAB>class1,class2,...`` with a non-empty class list.

Model file: length-prefixed binary, magic ``BEM1``, little-endian float64
tensors, trailing CRC32 over everything before it.
"""
from __future__ import annotations

import json
import math
import os
import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DataError, ModelFormatError, ShapeError
from .nets import DiffNet

MODEL_MAGIC = b"BEM1"
MODEL_VERSION = 1


def _atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(eq=False)
class EmbeddingTable:
    """Aligned matrix of per-entity vectors. Immutable after construction."""

    ids: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.ids = tuple(str(i) for i in self.ids)
        mat = np.array(self.matrix, dtype=float, copy=True)
        if mat.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got shape {mat.shape}")
        if len(self.ids) != mat.shape[0]:
            raise DataError(f"{len(self.ids)} ids for {mat.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate entity ids")
        if not np.all(np.isfinite(mat)):
            raise DataError("non-finite values in embedding matrix")
        mat.flags.writeable = False
        self.matrix = mat

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def id_index(self) -> dict[str, int]:
        return {eid: i for i, eid in enumerate(self.ids)}

    def row(self, entity_id: str) -> np.ndarray:
        return self.matrix[self.id_index[entity_id]]

    def subset(self, indices) -> "EmbeddingTable":
        indices = list(indices)
        return EmbeddingTable(ids=tuple(self.ids[i] for i in indices),
                              matrix=self.matrix[indices])


def normalize_rows(table: EmbeddingTable) -> EmbeddingTable:
    """L2-normalize each row; all-zero rows are left as they are."""
    norms = np.linalg.norm(table.matrix, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return EmbeddingTable(ids=table.ids, matrix=table.matrix / safe)


@dataclass(eq=False)
class LabelTable:
    """Per-entity non-empty class lists; list order is meaningful."""

    ids: tuple[str, ...]
    label_sets: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        self.ids = tuple(str(i) for i in self.ids)
        self.label_sets = tuple(tuple(ls) for ls in self.label_sets)
        if len(self.ids) != len(self.label_sets):
            raise DataError("id and label counts differ")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate entity ids in label table")
        for eid, ls in zip(self.ids, self.label_sets):
            if len(ls) == 0:
                raise DataError(f"empty label set for {eid!r}")

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def mapping(self) -> dict[str, tuple[str, ...]]:
        return dict(zip(self.ids, self.label_sets))


def _format_float(v: float) -> str:
    return format(v, ".17g")


def load_table(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse an embedding table, rejecting anything malformed.

    Raises DataError with the offending line number for ragged rows,
    unparsable or non-finite values and duplicate ids; ShapeError when the
    dimension disagrees with ``expected_dim`` or the ``#dim=`` header.
    """
    path = Path(path)
    ids: list[str] = []
    rows: list[list[float]] = []
    seen: dict[str, int] = {}
    dim: int | None = None
    header_dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if lineno == 1 and line.startswith("#dim="):
                try:
                    header_dim = int(line[len("#dim="):])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad #dim header {line!r}")
                if header_dim < 1:
                    raise DataError(f"{path}:{lineno}: non-positive #dim header")
                continue
            if line == "":
                raise DataError(f"{path}:{lineno}: blank line")
            parts = line.split("\t")
            eid = parts[0]
            if eid == "":
                raise DataError(f"{path}:{lineno}: empty entity id")
            if eid in seen:
                raise DataError(
                    f"{path}:{lineno}: duplicate id {eid!r} "
                    f"(first seen on line {seen[eid]})")
            seen[eid] = lineno
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: row has no values")
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DataError(
                    f"{path}:{lineno}: ragged row, {len(parts) - 1} values, expected {dim}")
            vals = []
            for field in parts[1:]:
                try:
                    v = float(field)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: unparsable value {field!r}")
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value {field!r}")
                vals.append(v)
            ids.append(eid)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if header_dim is not None and header_dim != dim:
        raise ShapeError(f"{path}: #dim={header_dim} but rows have {dim} values")
    if expected_dim is not None and dim != expected_dim:
        raise ShapeError(f"{path}: dimension {dim}, expected {expected_dim}")
    return EmbeddingTable(ids=tuple(ids), matrix=np.array(rows, dtype=float))


def write_table(table: EmbeddingTable, path) -> None:
    lines = [f"#dim={table.dim}"]
    for eid, row in zip(table.ids, table.matrix):
        lines.append(eid + "\t" + "\t".join(_format_float(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_labels(path) -> LabelTable:
    path = Path(path)
    ids: list[str] = []
    label_sets: list[tuple[str, ...]] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                raise DataError(f"{path}:{lineno}: blank line")
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'id<TAB>labels'")
            eid, labels = parts
            if eid in seen:
                raise DataError(
                    f"{path}:{lineno}: duplicate id {eid!r} "
                    f"(first seen on line {seen[eid]})")
            seen[eid] = lineno
            classes = tuple(c for c in labels.split(",") if c != "")
            if not classes:
                raise DataError(f"{path}:{lineno}: empty label set for {eid!r}")
            ids.append(eid)
            label_sets.append(classes)
    if not ids:
        raise DataError(f"{path}: no data rows")
    return LabelTable(ids=tuple(ids), label_sets=tuple(label_sets))


def write_labels(labels: LabelTable, path) -> None:
    lines = [f"{eid}\t{','.join(ls)}" for eid, ls in zip(labels.ids, labels.label_sets)]
    _atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class AlignResult:
    kept: int
    dropped_kg: int
    dropped_bg: int


def align(kg: EmbeddingTable, bg: EmbeddingTable,
          policy: str = "intersect") -> tuple[EmbeddingTable, EmbeddingTable, AlignResult]:
    """Put two tables on a common entity set, in kg order.

    ``strict`` raises on any id-set difference (listing up to 10 examples
    per side); ``intersect`` keeps the common ids.
    """
    if policy not in ("strict", "intersect"):
        raise AlignmentError(f"unknown alignment policy {policy!r}")
    kg_set = set(kg.ids)
    bg_set = set(bg.ids)
    if policy == "strict" and kg_set != bg_set:
        only_kg = sorted(kg_set - bg_set)[:10]
        only_bg = sorted(bg_set - kg_set)[:10]
        raise AlignmentError(
            f"id sets differ: {len(kg_set - bg_set)} only in kg "
            f"(e.g. {only_kg}), {len(bg_set - kg_set)} only in bg (e.g. {only_bg})")
    common = [eid for eid in kg.ids if eid in bg_set]
    if not common:
        raise AlignmentError("tables share no entity ids")
    kg_out = kg.subset([kg.id_index[eid] for eid in common])
    bg_out = bg.subset([bg.id_index[eid] for eid in common])
    result = AlignResult(kept=len(common),
                         dropped_kg=len(kg) - len(common),
                         dropped_bg=len(bg) - len(common))
    return kg_out, bg_out, result


def _pack_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype="<f8")
    out = [struct.pack("<B", arr.ndim)]
    for d in arr.shape:
        out.append(struct.pack("<I", d))
    out.append(arr.tobytes(order="C"))
    return b"".join(out)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.payload):
            raise ModelFormatError("model file ends prematurely")
        chunk = self.payload[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def tensor(self) -> np.ndarray:
        ndim = struct.unpack("<B", self.take(1))[0]
        shape = tuple(struct.unpack("<I", self.take(4))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(self.take(8 * count), dtype="<f8").reshape(shape)
        return data.astype(float)


def save_model(proj_net: DiffNet, infer_net: DiffNet, cfg, path) -> None:
    """Serialize both nets plus the training config, losslessly."""
    from .trainer import TrainConfig  # deferred: avoids an import cycle

    if not isinstance(cfg, TrainConfig):
        raise ModelFormatError("cfg must be a TrainConfig")
    from .elbo import edge_output_dim
    header = {
        "kg_dim": proj_net.in_dim,
        "bg_dim": proj_net.out_dim,
        "edge_dim": edge_output_dim(cfg.edge, proj_net.out_dim),
        "proj": [proj_net.in_dim, proj_net.hidden_dim, proj_net.out_dim],
        "infer": [infer_net.in_dim, infer_net.hidden_dim, infer_net.out_dim],
        "config": cfg.to_dict(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION),
            struct.pack("<I", len(header_bytes)), header_bytes]
    for net in (proj_net, infer_net):
        for arr in (net.W1, net.b1, net.W2, net.b2):
            body.append(_pack_tensor(arr))
    payload = b"".join(body)
    payload += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    _atomic_write_bytes(path, payload)


def load_model(path):
    """Read a model file back; returns (proj_net, infer_net, cfg).

    The CRC is verified before anything is parsed, so a truncated or
    corrupted file never yields a partial model.
    """
    from .trainer import TrainConfig  # deferred: avoids an import cycle
    from .elbo import edge_output_dim

    payload = Path(path).read_bytes()
    if len(payload) < len(MODEL_MAGIC) + 8 or payload[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    stored_crc = struct.unpack("<I", payload[-4:])[0]
    if zlib.crc32(payload[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ModelFormatError(f"{path}: checksum mismatch (truncated or corrupted)")
    reader = _Reader(payload[4:-4])
    version = struct.unpack("<I", reader.take(4))[0]
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    header_len = struct.unpack("<I", reader.take(4))[0]
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: bad header ({exc})")
    try:
        cfg = TrainConfig.from_dict(header["config"])
        proj_dims = [int(v) for v in header["proj"]]
        infer_dims = [int(v) for v in header["infer"]]
        kg_dim = int(header["kg_dim"])
        bg_dim = int(header["bg_dim"])
        edge_dim = int(header["edge_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: incomplete header ({exc})")
    tensors = [reader.tensor() for _ in range(8)]
    if reader.pos != len(reader.payload):
        raise ModelFormatError(f"{path}: trailing bytes after tensors")
    try:
        proj_net = DiffNet(*proj_dims, *tensors[:4])
        infer_net = DiffNet(*infer_dims, *tensors[4:])
    except ShapeError as exc:
        raise ModelFormatError(f"{path}: tensor shapes disagree with header ({exc})")
    if (proj_net.in_dim != kg_dim or proj_net.out_dim != bg_dim
            or infer_net.in_dim != kg_dim + bg_dim
            or edge_dim != edge_output_dim(cfg.edge, bg_dim)
            or infer_net.out_dim != 2 * kg_dim + 2 * edge_dim
            or cfg.hidden_dim != proj_net.hidden_dim):
        raise ModelFormatError(f"{path}: header dimensions are inconsistent")
    return proj_net, infer_net, cfg
