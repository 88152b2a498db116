"""Content-addressed image storage.

Addresses are the SHA-256 of the bytes, so puts are idempotent and the
address doubles as the photo id. The directory backend fans out by the first
two hex characters and writes temp-then-rename so a crash never leaves a
half-written blob at its final path.
"""

from __future__ import annotations

import os
import secrets
from pathlib import Path

from .codec import sha256


def content_address(data: bytes) -> str:
    return sha256(data).hex()


class BlobStore:
    """In-memory store; the default for simulation runs."""

    def __init__(self):
        self._blobs: dict[str, bytes] = {}

    def put(self, data: bytes) -> str:
        address = content_address(data)
        self._blobs[address] = data
        return address

    def get(self, address: str) -> bytes | None:
        return self._blobs.get(address)

    def exists(self, address: str) -> bool:
        return address in self._blobs


class DirectoryBlobStore(BlobStore):
    """One file per content hash under <root>/<first two hex chars>/<hash>."""

    def __init__(self, root: str | Path):
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, address: str) -> Path:
        return self.root / address[:2] / address

    def put(self, data: bytes) -> str:
        address = content_address(data)
        path = self._path(address)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.parent / f".tmp-{secrets.token_hex(8)}"
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return address

    def get(self, address: str) -> bytes | None:
        path = self._path(address)
        if not path.is_file():
            return None
        return path.read_bytes()

    def exists(self, address: str) -> bool:
        return self._path(address).is_file()
