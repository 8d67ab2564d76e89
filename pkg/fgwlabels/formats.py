"""
On-disk formats.

Binary files (pair bundle, plan) are framed as

    [u64 little-endian header length][UTF-8 JSON header][payload]

with the payload a run of little-endian float64 values. Bundle payload order:
featA (n x d), featB (m x d), ptsA (n x 3), ptsB (m x 3), massA (n), massB (m),
all row-major. Plan payload: n x m row-major. Labels are one JSON document,
diagnostics and metrics one JSON record per line.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from .config import Scenario
from .schemas import (
    BundleHeader,
    GroundTruthRecord,
    LabelRow,
    LabelsRecord,
    PlanHeader,
    StageRecord,
)
from .types import (
    DiscreteMeasure,
    FeatureMatrix,
    FloatArray,
    FormatError,
    GroundTruth,
    PairProblem,
    PointSet3D,
    PseudoLabels,
    StageDiagnostics,
    TransportPlan,
)
from .utils import dumps_record, ensure_dir, read_json, read_jsonl, write_json, write_jsonl

HEADER_LENGTH = struct.Struct("<Q")
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class Bundle:
    problem: PairProblem
    scenario: Scenario | None = None
    ground_truth: GroundTruth | None = None
    flags: tuple[str, ...] = ()


def _frame(header: BaseModel, blocks: list[FloatArray]) -> bytes:
    text = dumps_record(header.model_dump()).encode("utf-8")
    payload = np.concatenate([np.ravel(b) for b in blocks]).astype(PAYLOAD_DTYPE).tobytes()
    return HEADER_LENGTH.pack(len(text)) + text + payload


def _unframe(raw: bytes) -> tuple[Any, FloatArray]:
    if len(raw) < HEADER_LENGTH.size:
        raise FormatError("File shorter than its header length prefix")
    (length,) = HEADER_LENGTH.unpack_from(raw)
    end = HEADER_LENGTH.size + length
    if end > len(raw):
        raise FormatError(f"Header length {length} runs past end of file")
    try:
        header = json.loads(raw[HEADER_LENGTH.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"Unreadable header: {e}") from e
    payload = raw[end:]
    if len(payload) % PAYLOAD_DTYPE.itemsize:
        raise FormatError(f"Payload length {len(payload)} is not a multiple of 8")
    return header, np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)


def _validated(model: type[BaseModel], data: Any, what: str) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]["msg"]
        raise FormatError(f"Invalid {what}: {e.error_count()} error(s), first: {first}") from e


def bundle_payload_length(n: int, m: int, d: int) -> int:
    """Number of float64 values in a bundle payload."""
    return n * d + m * d + 3 * n + 3 * m + n + m


def encode_bundle(bundle: Bundle) -> bytes:
    prob = bundle.problem
    gt = bundle.ground_truth
    header = BundleHeader(
        n=prob.n,
        m=prob.m,
        d=prob.d,
        flags=list(bundle.flags),
        scenario=bundle.scenario,
        ground_truth=GroundTruthRecord(**gt.to_dict()) if gt is not None else None,
    )
    blocks = [
        prob.featA.data,
        prob.featB.data,
        prob.ptsA.points,
        prob.ptsB.points,
        prob.massA.mass,
        prob.massB.mass,
    ]
    return _frame(header, blocks)


def decode_bundle(raw: bytes) -> Bundle:
    data, values = _unframe(raw)
    header: BundleHeader = _validated(BundleHeader, data, "bundle header")
    n, m, d = header.n, header.m, header.d
    expected = bundle_payload_length(n, m, d)
    if values.size != expected:
        raise FormatError(f"Bundle payload has {values.size} values, expected {expected}")
    sizes = [n * d, m * d, 3 * n, 3 * m, n, m]
    featA, featB, ptsA, ptsB, massA, massB = np.split(values, np.cumsum(sizes)[:-1])
    problem = PairProblem(
        FeatureMatrix(featA.reshape(n, d)),
        FeatureMatrix(featB.reshape(m, d)),
        PointSet3D(ptsA.reshape(n, 3)),
        PointSet3D(ptsB.reshape(m, 3)),
        DiscreteMeasure(massA),
        DiscreteMeasure(massB),
    )
    gt = None
    if header.ground_truth is not None:
        gt = GroundTruth(
            assignment=dict(header.ground_truth.assignment),
            unmatched_sources=frozenset(header.ground_truth.unmatched_sources),
            unmatched_targets=frozenset(header.ground_truth.unmatched_targets),
        )
    return Bundle(problem, header.scenario, gt, tuple(header.flags))


def write_bundle(path: Path, bundle: Bundle) -> None:
    ensure_dir(path.parent)
    path.write_bytes(encode_bundle(bundle))


def read_bundle(path: Path) -> Bundle:
    return decode_bundle(path.read_bytes())


def encode_plan(plan: TransportPlan) -> bytes:
    n, m = plan.shape
    header = PlanHeader(
        n=n, m=m, solver=plan.solver, stage=plan.iteration, objective=plan.objective
    )
    return _frame(header, [plan.data])


def decode_plan(raw: bytes) -> TransportPlan:
    data, values = _unframe(raw)
    header: PlanHeader = _validated(PlanHeader, data, "plan header")
    expected = header.n * header.m
    if values.size != expected:
        raise FormatError(f"Plan payload has {values.size} values, expected {expected}")
    return TransportPlan(
        values.reshape(header.n, header.m),
        solver=header.solver,
        iteration=header.stage,
        objective=header.objective,
    )


def write_plan(path: Path, plan: TransportPlan) -> None:
    ensure_dir(path.parent)
    path.write_bytes(encode_plan(plan))


def read_plan(path: Path) -> TransportPlan:
    return decode_plan(path.read_bytes())


def labels_record(labels: PseudoLabels, relaxed_cc: bool) -> LabelsRecord:
    n, m = labels.shape
    rows = [
        LabelRow(source=i, candidates=list(kept), proposed=list(proposed))
        for i, (kept, proposed) in enumerate(zip(labels.candidates, labels.proposed))
    ]
    return LabelsRecord(n=n, m=m, k=labels.k, relaxed_cc=relaxed_cc, rows=rows)


def labels_from_record(record: LabelsRecord) -> PseudoLabels:
    if len(record.rows) != record.n:
        raise FormatError(f"Labels file has {len(record.rows)} rows, expected {record.n}")
    hard = np.zeros((record.n, record.m), dtype=np.bool_)
    for i, row in enumerate(record.rows):
        if row.source != i:
            raise FormatError(f"Labels row {i} is tagged source {row.source}")
        for j, _ in row.candidates:
            if not 0 <= j < record.m:
                raise FormatError(f"Labels row {i}: target {j} out of range")
            hard[i, j] = True
    return PseudoLabels(
        hard=hard,
        candidates=tuple(tuple(row.candidates) for row in record.rows),
        proposed=tuple(tuple(row.proposed) for row in record.rows),
        kept_mask=np.array([bool(row.candidates) for row in record.rows], dtype=np.bool_),
        k=record.k,
    )


def write_labels(path: Path, labels: PseudoLabels, relaxed_cc: bool) -> None:
    write_json(path, labels_record(labels, relaxed_cc).model_dump())


def read_labels(path: Path) -> tuple[PseudoLabels, bool]:
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise FormatError(f"Unreadable labels file: {e}") from e
    record: LabelsRecord = _validated(LabelsRecord, data, "labels file")
    return labels_from_record(record), record.relaxed_cc


def write_diagnostics(path: Path, diagnostics: list[StageDiagnostics]) -> None:
    write_jsonl(path, [d.to_dict() for d in diagnostics])


def read_diagnostics(path: Path) -> list[StageDiagnostics]:
    try:
        lines = read_jsonl(path)
    except json.JSONDecodeError as e:
        raise FormatError(f"Unreadable diagnostics file: {e}") from e
    records = [_validated(StageRecord, line, "diagnostics line") for line in lines]
    return [StageDiagnostics(**r.model_dump()) for r in records]
