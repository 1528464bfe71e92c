"""On-disk formats: PGM input, the OCDL dictionary container, CSV logs and
run manifests.

All formats are bit-exact: a dictionary round-trips through save/load with an
identical payload, and logs/manifests contain only deterministically
formatted values.
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, FormatError, UnsupportedVersionError
from .learner import Dictionary

__all__ = [
    "load_dictionary",
    "load_image",
    "read_manifest",
    "save_dictionary",
    "write_log",
    "write_manifest",
]

DICT_MAGIC = b"OCDL"
DICT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")  # magic, version, m, l1, l2

LOG_COLUMNS = ("t", "elapsed_seconds", "alpha", "cbpdn_iters", "fista_iters",
               "test_functional")


class _PgmScanner:
    """Tokenizer for the whitespace/comment-separated PGM header."""

    def __init__(self, data, path):
        self.data = data
        self.pos = 0
        self.path = path

    def fail(self, message, offset=None):
        offset = self.pos if offset is None else offset
        raise FormatError(f"{self.path}: {message} (byte offset {offset})", offset=offset)

    def skip_separators(self):
        data = self.data
        while self.pos < len(data):
            byte = data[self.pos]
            if byte in b" \t\r\n":
                self.pos += 1
            elif byte == ord("#"):
                while self.pos < len(data) and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return
        self.fail("unexpected end of header")

    def read_int(self, what):
        self.skip_separators()
        start = self.pos
        while self.pos < len(self.data) and chr(self.data[self.pos]).isdigit():
            self.pos += 1
        if self.pos == start:
            self.fail(f"expected {what}")
        return int(self.data[start:self.pos]), start


def load_image(path):
    """Load a binary 8-bit grayscale PGM ("P5", maxval 255) as values in [0, 1]."""
    data = Path(path).read_bytes()
    scanner = _PgmScanner(data, path)
    if data[:2] != b"P5":
        scanner.fail(f"bad magic {data[:2]!r}, expected b'P5'", offset=0)
    scanner.pos = 2
    width, _ = scanner.read_int("width")
    height, _ = scanner.read_int("height")
    maxval, maxval_off = scanner.read_int("maxval")
    if maxval != 255:
        scanner.fail(f"unsupported maxval {maxval}, expected 255", offset=maxval_off)
    if width < 1 or height < 1:
        scanner.fail(f"bad dimensions {width}x{height}")
    if scanner.pos >= len(data) or data[scanner.pos] not in b" \t\r\n":
        scanner.fail("expected single whitespace byte before pixel data")
    payload_start = scanner.pos + 1
    expected = payload_start + width * height
    if len(data) < expected:
        raise FormatError(
            f"{path}: truncated pixel data, file ends at byte {len(data)} "
            f"but {expected} bytes are needed",
            offset=len(data),
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height,
                           offset=payload_start)
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def save_dictionary(dictionary, path):
    """Write the binary dictionary container (header + float64 LE payload)."""
    dictionary.validate(tol=1e-9)
    m, (l1, l2) = dictionary.count, dictionary.filter_shape
    payload = np.ascontiguousarray(dictionary.filters, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DICT_MAGIC, DICT_VERSION, m, l1, l2))
        fh.write(payload)


def load_dictionary(path):
    """Read a dictionary container, verifying structure and filter norms."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte header",
                          offset=len(data))
    magic, version, m, l1, l2 = _HEADER.unpack_from(data)
    if magic != DICT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DICT_MAGIC!r}", offset=0)
    if version != DICT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported version {version}, this build reads version "
            f"{DICT_VERSION}", offset=4)
    expected = _HEADER.size + 8 * m * l1 * l2
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload size mismatch, expected {expected} bytes total, "
            f"got {len(data)}", offset=min(len(data), expected))
    filters = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(m, l1, l2)
    dictionary = Dictionary(filters.copy())
    norm_err = np.abs(dictionary.norms() - 1.0)
    if not np.all(np.isfinite(dictionary.filters)) or np.any(norm_err > 1e-9):
        raise CorruptFileError(
            f"{path}: decoded filters violate the unit-norm invariant "
            f"(max deviation {norm_err.max():.3e})", offset=_HEADER.size)
    return dictionary


def _fmt(value):
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_log(records, path):
    """Write training records as a plain numeric CSV (header + one row per step)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.t,
                _fmt(rec.elapsed_seconds),
                _fmt(rec.alpha),
                rec.cbpdn_iters,
                rec.fista_iters,
                _fmt(rec.test_functional),
            ])


def write_manifest(entries, path):
    """Write run metadata as one ``key=value`` line per entry, in given order."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={_fmt(value)}\n")


def read_manifest(path):
    entries = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: manifest line without '=': {line!r}")
        entries[key] = value
    return entries
