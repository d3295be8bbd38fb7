"""Mask, field and table serialization.

File layout follows image convention: the first row of a PGM or text file
is the top grid row (j = ny - 1).  Masks map inside cells to 255 and
outside to 0; text masks are rows of '0'/'1' characters.  CSV writing
formats floats with ``repr`` (shortest round-trip form) and a fixed "\\n"
terminator, so identical data always produces identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import CellSet, Grid, ScalarField

__all__ = [
    "MaskIOError",
    "save_mask_pgm",
    "load_mask_pgm",
    "save_mask_text",
    "load_mask_text",
    "save_field_text",
    "load_field_text",
    "write_csv",
]


class MaskIOError(ValueError):
    """Malformed mask or field file."""


def save_mask_pgm(cells: CellSet, path: str | Path, binary: bool = False) -> None:
    """Write the mask as PGM, plain (P2) by default or raw (P5)."""
    img = np.flipud(cells.mask).astype(np.uint8) * 255
    ny, nx = img.shape
    path = Path(path)
    if binary:
        with path.open("wb") as fh:
            fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
        return
    lines = [f"P2\n{nx} {ny}\n255"]
    for row in img:
        lines.append(" ".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _pgm_tokens(data: bytes):
    """Header tokens of a PGM, skipping '#' comments; returns (tokens, offset)."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise MaskIOError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # past the single whitespace after maxval


def load_mask_pgm(path: str | Path) -> np.ndarray:
    """Read a P2/P5 PGM into a bool mask (row 0 = bottom grid row)."""
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    try:
        nx, ny, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MaskIOError(f"bad PGM header in {path}: {exc}") from None
    if magic not in (b"P2", b"P5") or nx < 1 or ny < 1 or not 0 < maxval < 65536:
        raise MaskIOError(f"unsupported PGM header {magic!r} {nx}x{ny} maxval {maxval}")
    if magic == b"P5":
        if maxval > 255:
            raise MaskIOError("16-bit raw PGM not supported")
        if len(data) - offset < nx * ny:
            raise MaskIOError(f"raw PGM body too short in {path}")
        body = np.frombuffer(data, dtype=np.uint8, count=nx * ny, offset=offset)
        img = body.reshape(ny, nx)
    else:
        try:
            values = np.array(data[offset - 1 :].split(), dtype=np.int64)
        except ValueError as exc:
            raise MaskIOError(f"bad P2 sample in {path}: {exc}") from None
        if values.size != nx * ny:
            raise MaskIOError(
                f"P2 body has {values.size} samples, expected {nx * ny} in {path}"
            )
        img = values.reshape(ny, nx)
    return np.flipud(img > maxval // 2).copy()


def save_mask_text(cells: CellSet, path: str | Path) -> None:
    """Write rows of '0'/'1' characters, top row first."""
    rows = ["".join("1" if v else "0" for v in row) for row in np.flipud(cells.mask)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="ascii")


def load_mask_text(path: str | Path) -> np.ndarray:
    """Read a '0'/'1' text mask into a bool array (row 0 = bottom grid row)."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="ascii").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MaskIOError(f"empty mask file {path}")
    width = len(lines[0])
    rows = []
    for num, ln in enumerate(lines, 1):
        if len(ln) != width or set(ln) - {"0", "1"}:
            raise MaskIOError(f"{path}:{num}: mask rows must be equal-length strings of 0/1")
        rows.append([ch == "1" for ch in ln])
    return np.flipud(np.array(rows, dtype=bool)).copy()


def save_field_text(field: ScalarField | np.ndarray, path: str | Path) -> None:
    """Write a real-valued field as whitespace-separated rows, top row first."""
    values = field.values if isinstance(field, ScalarField) else np.asarray(field, np.float64)
    lines = [" ".join(repr(float(v)) for v in row) for row in np.flipud(values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_field_text(path: str | Path) -> np.ndarray:
    """Read a whitespace-separated real field (row 0 = bottom grid row)."""
    rows = []
    width = None
    for num, ln in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        if not ln.strip():
            continue
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError as exc:
            raise MaskIOError(f"{path}:{num}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MaskIOError(f"{path}:{num}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise MaskIOError(f"empty field file {path}")
    return np.flipud(np.array(rows, dtype=np.float64)).copy()


def _cell_text(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Deterministic CSV: fixed header, repr floats, "\\n" line endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell_text(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
