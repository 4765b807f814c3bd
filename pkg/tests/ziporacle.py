"""Independent ZIP structure reader used as an oracle in tests.

Parses the end-of-central-directory record and the central directory with
struct alone (no zipfile), so container-layout assertions do not share code
with the implementation under test.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

_EOCD_SIG = b"PK\x05\x06"
_CDIR_SIG = b"PK\x01\x02"
_LOCAL_SIG = b"PK\x03\x04"


@dataclass
class ZipRecord:
    name: str
    compression: int  # 0 stored, 8 deflated
    local_header_offset: int
    compressed_size: int
    uncompressed_size: int


def read_central_directory(data: bytes) -> list[ZipRecord]:
    eocd_at = data.rfind(_EOCD_SIG)
    if eocd_at < 0:
        raise ValueError("no end-of-central-directory record")
    (
        _disk,
        _cd_disk,
        _n_disk,
        n_total,
        _cd_size,
        cd_offset,
        _comment_len,
    ) = struct.unpack("<HHHHIIH", data[eocd_at + 4 : eocd_at + 22])

    records: list[ZipRecord] = []
    pos = cd_offset
    for _ in range(n_total):
        if data[pos : pos + 4] != _CDIR_SIG:
            raise ValueError(f"bad central directory signature at {pos}")
        (
            _ver_made,
            _ver_need,
            _flags,
            compression,
            _mtime,
            _mdate,
            _crc,
            csize,
            usize,
            name_len,
            extra_len,
            comment_len,
            _disk_start,
            _iattr,
            _eattr,
            lho,
        ) = struct.unpack("<HHHHHHIIIHHHHHII", data[pos + 4 : pos + 46])
        name = data[pos + 46 : pos + 46 + name_len].decode("utf-8")
        records.append(ZipRecord(name, compression, lho, csize, usize))
        pos += 46 + name_len + extra_len + comment_len
    return records


def first_local_entry(data: bytes) -> tuple[str, int, bytes]:
    """Name, compression method, and raw stored bytes of the entry whose
    local header sits at offset 0."""
    if data[:4] != _LOCAL_SIG:
        raise ValueError("file does not start with a local file header")
    (
        _ver,
        flags,
        compression,
        _mtime,
        _mdate,
        _crc,
        csize,
        _usize,
        name_len,
        extra_len,
    ) = struct.unpack("<HHHHHIIIHH", data[4:30])
    if flags & 0x08:
        raise ValueError("first entry uses a data descriptor")
    name = data[30 : 30 + name_len].decode("utf-8")
    start = 30 + name_len + extra_len
    return name, compression, data[start : start + csize]
