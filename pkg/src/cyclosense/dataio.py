"""On-disk formats: raw I/Q records, matrix containers and dataset manifests.

Raw I/Q
    Headerless little-endian float32, interleaved I, Q, I, Q, ...  The
    manifest carries the record length and format version.

Matrix container
    16-byte header ``b"SCF1"``, uint32 rows, uint32 cols, uint32 dtype code,
    then the row-major little-endian float32 payload.  Code 1 is an SCF
    magnitude matrix; code 0x101 marks a feature matrix and is followed by
    one ``kind`` byte before the payload.

Manifest
    Tab-separated text, one record per line, preceded by a version comment
    and a column header (see ``MANIFEST_FIELDS``).
"""

from __future__ import annotations

import math
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInput
from .features import FeatureKind, FeatureMatrix
from .scf import ScfMatrix
from .waveform import ComplexSignal, make_rng

__all__ = [
    "write_iq",
    "read_iq",
    "write_matrix",
    "read_matrix",
    "checksum",
    "ManifestEntry",
    "DatasetManifest",
    "MANIFEST_NAME",
    "MANIFEST_FIELDS",
    "build_manifest",
    "stratified_split",
    "stratified_indices",
]

MATRIX_MAGIC = b"SCF1"
_CODE_SCF = 1
_CODE_FEATURE = 0x101
MANIFEST_NAME = "manifest.tsv"
MANIFEST_HEADER = "# cyclosense-manifest v1"


# -- raw I/Q ---------------------------------------------------------------


def write_iq(path, sig: ComplexSignal) -> None:
    x = sig.samples if isinstance(sig, ComplexSignal) else np.asarray(sig, dtype=np.complex128)
    buf = np.empty(2 * x.size, dtype="<f4")
    buf[0::2] = x.real
    buf[1::2] = x.imag
    Path(path).write_bytes(buf.tobytes())


def read_iq(path, length: int | None = None, sample_rate_hz: float = 1.0) -> ComplexSignal:
    """Read an interleaved float32 record; ``length`` (samples) is checked if given."""
    data = Path(path).read_bytes()
    if not data:
        raise FormatError(f"{path}: empty I/Q file", offset=0)
    whole = len(data) - len(data) % 8
    if whole != len(data):
        raise FormatError(f"{path}: truncated I/Q payload, partial sample", offset=whole)
    if length is not None and len(data) != 8 * length:
        raise FormatError(f"{path}: expected {length} samples, found {len(data) // 8}", offset=min(len(data), 8 * length))
    v = np.frombuffer(data, dtype="<f4").astype(np.float64)
    return ComplexSignal(v[0::2] + 1j * v[1::2], sample_rate_hz)


# -- matrix container -------------------------------------------------------


def _default_axes(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray, bool]:
    # odd row counts are one-sided alpha axes (P/2 + 1 rows, hop of one sample)
    freq = np.fft.fftshift(np.fft.fftfreq(cols))
    if rows % 2 == 1:
        p = 2 * (rows - 1)
        return np.arange(rows) / max(p, 1), freq, True
    return np.fft.fftshift(np.fft.fftfreq(rows)), freq, False


def write_matrix(path, m) -> None:
    values = np.asarray(m.values)
    if np.iscomplexobj(values):
        raise InvalidInput("matrix container stores real values; take the magnitude first")
    rows, cols = values.shape
    if isinstance(m, FeatureMatrix):
        head = MATRIX_MAGIC + struct.pack("<III", rows, cols, _CODE_FEATURE) + struct.pack("<B", int(m.kind))
    else:
        head = MATRIX_MAGIC + struct.pack("<III", rows, cols, _CODE_SCF)
    Path(path).write_bytes(head + np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_matrix(path):
    """Inverse of ``write_matrix``; returns a ScfMatrix or FeatureMatrix."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: header truncated", offset=len(data))
    magic = data[:4]
    if magic[:3] != MATRIX_MAGIC[:3]:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"{path}: unsupported container version {magic[3:]!r}", offset=3)
    rows, cols, code = struct.unpack_from("<III", data, 4)
    pos = 16
    kind = None
    if code == _CODE_FEATURE:
        if len(data) < 17:
            raise FormatError(f"{path}: missing kind byte", offset=16)
        try:
            kind = FeatureKind(data[16])
        except ValueError:
            raise FormatError(f"{path}: unknown feature kind {data[16]}", offset=16) from None
        pos = 17
    elif code != _CODE_SCF:
        raise FormatError(f"{path}: unknown dtype code {code:#x}", offset=12)
    need = pos + 4 * rows * cols
    if len(data) != need:
        raise FormatError(f"{path}: payload is {len(data) - pos} bytes, expected {need - pos}", offset=min(len(data), need))
    values = np.frombuffer(data, dtype="<f4", offset=pos).reshape(rows, cols).astype(np.float64)
    if kind is not None:
        return FeatureMatrix(values, kind)
    alpha, freq, one_sided = _default_axes(rows, cols)
    try:
        return ScfMatrix(values, alpha, freq, one_sided)
    except InvalidInput as e:
        raise FormatError(f"{path}: {e}", offset=pos) from e


# -- manifest ---------------------------------------------------------------


def checksum(path) -> str:
    """CRC32 of the file contents as 8 hex digits."""
    return f"{zlib.crc32(Path(path).read_bytes()) & 0xFFFFFFFF:08x}"


@dataclass(frozen=True)
class ManifestEntry:
    file_path: str
    kind: str
    class_label: int
    snr_db: float
    seed: int
    length_or_shape: str
    checksum: str
    signal_power: float = 0.0
    noise_power: float = 0.0

    @property
    def record_key(self) -> tuple:
        return (self.class_label, self.snr_db, self.seed)

    @property
    def realized_snr_db(self) -> float:
        if self.signal_power <= 0 or self.noise_power <= 0:
            return -math.inf if self.signal_power <= 0 else math.inf
        return 10.0 * math.log10(self.signal_power / self.noise_power)


MANIFEST_FIELDS = tuple(f.name for f in fields(ManifestEntry))


def _fmt_float(x: float) -> str:
    return repr(float(x))


class DatasetManifest:
    def __init__(self, entries=(), root=None):
        self.entries: list[ManifestEntry] = list(entries)
        self.root = Path(root) if root is not None else None
        paths = [e.file_path for e in self.entries]
        if len(set(paths)) != len(paths):
            dup = next(p for p, n in Counter(paths).items() if n > 1)
            raise InvalidInput(f"duplicate manifest path {dup}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def path_of(self, e: ManifestEntry) -> Path:
        p = Path(e.file_path)
        return p if p.is_absolute() or self.root is None else self.root / p

    def of_kind(self, kind: str) -> "DatasetManifest":
        return DatasetManifest([e for e in self.entries if e.kind == kind], self.root)

    def strata_counts(self, kind: str | None = None) -> dict[tuple[int, float], int]:
        c = Counter((e.class_label, e.snr_db) for e in self.entries if kind is None or e.kind == kind)
        return dict(sorted(c.items()))

    def add(self, e: ManifestEntry) -> None:
        if any(x.file_path == e.file_path for x in self.entries):
            self.entries = [e if x.file_path == e.file_path else x for x in self.entries]
        else:
            self.entries.append(e)

    def verify(self) -> None:
        for e in self.entries:
            got = checksum(self.path_of(e))
            if got != e.checksum:
                raise FormatError(f"checksum mismatch for {e.file_path}: manifest {e.checksum}, file {got}")

    def to_text(self) -> str:
        lines = [MANIFEST_HEADER, "\t".join(MANIFEST_FIELDS)]
        for e in self.entries:
            lines.append(
                "\t".join(
                    [
                        e.file_path,
                        e.kind,
                        str(e.class_label),
                        _fmt_float(e.snr_db),
                        str(e.seed),
                        e.length_or_shape,
                        e.checksum,
                        _fmt_float(e.signal_power),
                        _fmt_float(e.noise_power),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def save(self, path=None) -> Path:
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        path.write_text(self.to_text())
        return path

    @classmethod
    def from_text(cls, text: str, root=None) -> "DatasetManifest":
        lines = text.splitlines()
        if not lines or lines[0].strip() != MANIFEST_HEADER:
            raise FormatError("missing or unsupported manifest header", offset=0)
        if len(lines) < 2 or tuple(lines[1].split("\t")) != MANIFEST_FIELDS:
            raise FormatError("manifest column header does not match", offset=len(lines[0]) + 1)
        entries = []
        for n, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != len(MANIFEST_FIELDS):
                raise FormatError(f"manifest line {n} has {len(parts)} fields")
            try:
                entries.append(
                    ManifestEntry(
                        parts[0],
                        parts[1],
                        int(parts[2]),
                        float(parts[3]),
                        int(parts[4]),
                        parts[5],
                        parts[6],
                        float(parts[7]),
                        float(parts[8]),
                    )
                )
            except ValueError as e:
                raise FormatError(f"manifest line {n}: {e}") from e
        return cls(entries, root)

    @classmethod
    def load(cls, path, verify: bool = True) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        m = cls.from_text(path.read_text(), path.parent)
        if verify:
            m.verify()
        return m


def build_manifest(directory) -> DatasetManifest:
    """Load and checksum-verify the manifest of a dataset directory."""
    return DatasetManifest.load(Path(directory), verify=True)


def stratified_indices(labels, strata, train_frac: float = 0.6, seed: int = 0):
    """Index split (train, test) per (label, stratum) group.

    Each group sends round(train_frac * n) members, chosen by a seeded
    permutation, to the training side.  Both index arrays come back sorted.
    """
    if not 0.0 < train_frac < 1.0:
        raise InvalidInput("train_frac must lie strictly between 0 and 1")
    labels = np.asarray(labels)
    strata = np.asarray(strata)
    rng = make_rng(seed)
    groups: dict[tuple, list[int]] = {}
    for i, key in enumerate(zip(labels.tolist(), strata.tolist())):
        groups.setdefault(key, []).append(i)
    train = []
    for key in sorted(groups):
        idx = groups[key]
        order = rng.permutation(len(idx))
        k = int(math.floor(train_frac * len(idx) + 0.5))
        train.extend(idx[j] for j in order[:k])
    train_idx = np.array(sorted(train), dtype=np.int64)
    test_idx = np.setdiff1d(np.arange(len(labels)), train_idx)
    return train_idx, test_idx


def stratified_split(manifest: DatasetManifest, train_frac: float = 0.6, seed: int = 0):
    """Split records into (train, test) manifests per (class, SNR) stratum.

    All entries of one record (its I/Q file and any derived matrices) land
    on the same side.
    """
    keys = sorted({e.record_key for e in manifest})
    tr, _ = stratified_indices([k[0] for k in keys], [k[1] for k in keys], train_frac, seed)
    train_keys = {keys[i] for i in tr}
    train = [e for e in manifest if e.record_key in train_keys]
    test = [e for e in manifest if e.record_key not in train_keys]
    return DatasetManifest(train, manifest.root), DatasetManifest(test, manifest.root)


def with_checksum(e: ManifestEntry, path) -> ManifestEntry:
    return replace(e, checksum=checksum(path))
