"""
DigiWFS Unwrap - PGRID v1 file format

Layout (little endian):
    16 bytes   magic, b"PGRIDv1\\n" padded with NUL bytes
    u32        N
    u32        flags (bit 0: mask present)
    N*N f8     values, row-major
    N*N u8     mask, row-major (only when bit 0 is set)

Writes go through a temporary file in the target directory and os.replace,
so readers never see a partial grid.
"""

import logging
import os
import struct
import tempfile

import numpy as np

from backend.errors import GridIOError
from backend.optics.grid import PhaseGrid

logger = logging.getLogger(__name__)

MAGIC = b"PGRIDv1\n".ljust(16, b"\0")
HEADER = struct.Struct("<II")
FLAG_MASK = 1


def encode_grid(grid: PhaseGrid, include_mask: bool = True) -> bytes:
    has_mask = include_mask and not bool(grid.mask.all())
    flags = FLAG_MASK if has_mask else 0
    parts = [MAGIC, HEADER.pack(grid.n, flags), grid.values.astype("<f8").tobytes()]
    if has_mask:
        parts.append(grid.mask.astype(np.uint8).tobytes())
    return b"".join(parts)


def decode_grid(payload: bytes, source: str = "<bytes>") -> PhaseGrid:
    """
    Parse a PGRID v1 payload.

    Args:
        payload (bytes): File contents
        source (str): Name used in error messages

    Returns:
        PhaseGrid: Grid with pitch 1
    """
    head = len(MAGIC) + HEADER.size
    if len(payload) < head or payload[:len(MAGIC)] != MAGIC:
        raise GridIOError(f"{source}: not a PGRID v1 file")
    n, flags = HEADER.unpack_from(payload, len(MAGIC))
    count = n * n
    expected = head + 8 * count + (count if flags & FLAG_MASK else 0)
    if len(payload) != expected:
        raise GridIOError(f"{source}: expected {expected} bytes for N={n}, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8", count=count, offset=head).reshape(n, n)
    mask = None
    if flags & FLAG_MASK:
        raw = np.frombuffer(payload, dtype=np.uint8, count=count, offset=head + 8 * count)
        mask = raw.reshape(n, n) != 0
    return PhaseGrid(values.astype(float), mask)


def load_grid(path: str) -> PhaseGrid:
    """
    Read a PGRID v1 file.

    Args:
        path (str): File path

    Returns:
        PhaseGrid: Loaded grid
    """
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise GridIOError(f"Cannot read grid file {path}: {str(e)}") from e
    grid = decode_grid(payload, source=path)
    logger.debug(f"Loaded {grid.n}x{grid.n} grid from {path}")
    return grid


def write_bytes_atomic(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise
    except OSError as e:
        raise GridIOError(f"Cannot write {path}: {str(e)}") from e


def save_grid(grid: PhaseGrid, path: str) -> str:
    """
    Write a grid atomically.

    Args:
        grid (PhaseGrid): Grid to store
        path (str): Destination path

    Returns:
        str: The path written
    """
    write_bytes_atomic(path, encode_grid(grid))
    logger.info(f"Wrote {grid.n}x{grid.n} grid to {path}")
    return path
