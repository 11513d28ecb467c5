"""On-disk datasets: raw little-endian f32 blobs plus a JSON manifest.

Layout of a dataset directory::

    manifest.json
    CleanEEG.f32        # count * 512 float32 values, little endian
    EMGArtifact.f32

The manifest lists every blob (file, kind, count, byte order, element type,
segment ids) and the mix records pairing clean and artifact ids at an SNR.
Contaminated segments are never stored; ``mix`` regenerates them exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, ShapeError
from .signal import SEGMENT_LEN, NormMode, NormState, Segment, SegmentKind, MixSpec, mix

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_F32LE = np.dtype("<f4")


@dataclass(frozen=True)
class MixRecord:
    eeg_id: str
    emg_id: str
    snr_db: float
    split: str = "train"


@dataclass
class Dataset:
    segments: dict[str, Segment] = field(default_factory=dict)
    pairs: list[MixRecord] = field(default_factory=list)
    seed: int = 0

    def add(self, seg: Segment) -> Segment:
        # storage is f32; quantize now so save/load is bit-exact
        seg = seg.with_samples(seg.samples.astype(np.float32).astype(np.float64))
        self.segments[seg.id] = seg
        return seg

    def of_kind(self, kind: SegmentKind) -> list[Segment]:
        return [s for s in self.segments.values() if s.kind is kind]

    def records(self, split: str | None = None, snr_db: float | None = None) -> list[MixRecord]:
        return [
            p for p in self.pairs
            if (split is None or p.split == split) and (snr_db is None or p.snr_db == snr_db)
        ]

    def snr_levels(self) -> list[float]:
        return sorted({p.snr_db for p in self.pairs})

    def mixtures(self, split: str | None = None, snr_db: float | None = None,
                 norm_mode: NormMode = NormMode.MINMAX01) -> list["Mixture"]:
        out = []
        for rec in self.records(split, snr_db):
            clean = self.segments[rec.eeg_id]
            y, spec, state = mix(clean, self.segments[rec.emg_id], rec.snr_db, norm_mode, seed=self.seed)
            out.append(Mixture(y, clean, spec, state))
        return out


@dataclass(frozen=True)
class Mixture:
    """A contaminated segment (normalized) with its ground truth."""

    contaminated: Segment
    clean: Segment
    spec: MixSpec
    norm: NormState

    @property
    def raw(self) -> np.ndarray:
        return self.contaminated.samples * self.norm.scale + self.norm.offset


def save_dataset(dataset: Dataset, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for kind in SegmentKind:
        segs = dataset.of_kind(kind)
        if not segs:
            continue
        fname = f"{kind.value}.f32"
        block = np.stack([s.samples for s in segs]).astype(_F32LE)
        (directory / fname).write_bytes(block.tobytes())
        entries.append({
            "file": fname,
            "format": "f32",
            "kind": kind.value,
            "count": len(segs),
            "byte_order": "little",
            "element_type": "float32",
            "ids": [s.id for s in segs],
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": dataset.seed,
        "segment_len": SEGMENT_LEN,
        "entries": entries,
        "pairing": [asdict(p) for p in dataset.pairs],
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    return obj[key]


def load_dataset(manifest_path) -> Dataset:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise IoError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if not isinstance(manifest, dict):
        raise FormatError(f"{manifest_path}: top level must be an object")
    version = _require(manifest, "format_version", str(manifest_path))
    if version != FORMAT_VERSION:
        raise FormatError(f"{manifest_path}: unsupported format_version {version!r}")

    ds = Dataset(seed=int(manifest.get("seed", 0)))
    for i, entry in enumerate(_require(manifest, "entries", str(manifest_path))):
        where = f"{manifest_path} entry {i}"
        try:
            kind = SegmentKind(_require(entry, "kind", where))
        except ValueError as exc:
            raise FormatError(f"{where}: unknown kind {entry['kind']!r}") from exc
        file = manifest_path.parent / _require(entry, "file", where)
        count = int(_require(entry, "count", where))
        ids = entry.get("ids") or [f"{kind.value}{j:05d}" for j in range(count)]
        if len(ids) != count:
            raise FormatError(f"{where}: {len(ids)} ids for count {count}")
        if entry.get("format", "f32") == "csv":
            rows = read_csv_rows(file)
        else:
            rows = _read_f32_rows(file, entry, where)
        if len(rows) != count:
            raise FormatError(f"{where}: count {count} does not match {len(rows)} stored segments")
        for seg_id, row in zip(ids, rows):
            ds.segments[seg_id] = Segment(row, kind, seg_id)

    for j, rec in enumerate(manifest.get("pairing", [])):
        where = f"{manifest_path} pairing {j}"
        try:
            record = MixRecord(str(rec["eeg_id"]), str(rec["emg_id"]), float(rec["snr_db"]),
                               str(rec.get("split", "train")))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{where}: malformed record {rec!r}") from exc
        for key, kind in ((record.eeg_id, SegmentKind.CLEAN_EEG), (record.emg_id, SegmentKind.EMG_ARTIFACT)):
            seg = ds.segments.get(key)
            if seg is None or seg.kind is not kind:
                raise FormatError(f"{where}: references absent {kind.value} segment {key!r}")
        ds.pairs.append(record)
    return ds


def _read_f32_rows(file: Path, entry: dict, where: str) -> np.ndarray:
    if entry.get("byte_order", "little") != "little" or entry.get("element_type", "float32") != "float32":
        raise FormatError(f"{where}: only little-endian float32 blobs are supported")
    if not file.exists():
        raise IoError(f"{where}: missing file {file}")
    raw = file.read_bytes()
    seg_bytes = SEGMENT_LEN * _F32LE.itemsize
    if len(raw) % seg_bytes:
        raise ShapeError(f"{file}: size {len(raw)} is not a whole number of {SEGMENT_LEN}-sample segments")
    return np.frombuffer(raw, dtype=_F32LE).reshape(-1, SEGMENT_LEN).astype(np.float64)


def read_csv_rows(path) -> np.ndarray:
    """One segment per row, 512 comma-separated values, no header."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"missing file {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != SEGMENT_LEN:
                raise ShapeError(f"{path}:{lineno}: expected {SEGMENT_LEN} values, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=np.float64).reshape(-1, SEGMENT_LEN)


def write_csv_rows(path, rows) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def load_pool(path, kind: SegmentKind, prefix: str | None = None) -> list[Segment]:
    """Read a source pool: an (N, 512) ``.npy`` array (EEGdenoiseNet layout) or a CSV."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"missing source pool {path}")
    if path.suffix == ".npy":
        rows = np.load(path)
        if rows.ndim != 2 or rows.shape[1] != SEGMENT_LEN:
            raise ShapeError(f"{path}: expected (N, {SEGMENT_LEN}) array, got {rows.shape}")
    else:
        rows = read_csv_rows(path)
    prefix = prefix or path.stem
    return [Segment(r, kind, f"{prefix}{i:05d}") for i, r in enumerate(rows)]
