"""Checkpoint container.

A ``.npz`` archive (uncompressed) holding one little-endian float64 array per
named parameter plus a ``__header__`` entry: a JSON document with the format
version and whatever the caller records (config hash, seed, architecture,
target scaler, preprocessing). Writing then reading returns the stored
arrays bit for bit."""

import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import MissingFile, SchemaMismatch

FORMAT_VERSION = 1
HEADER_KEY = '__header__'


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], header: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {name: np.asarray(value, dtype='<f8') for name, value in params.items()}
    document = dict(header, format_version=FORMAT_VERSION, parameters=sorted(payload))
    payload[HEADER_KEY] = np.array(json.dumps(document, sort_keys=True))
    with path.open('wb') as handle:
        np.savez(handle, **payload)
    return path


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"checkpoint not found: {path}", path=path)
    with np.load(path, allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise SchemaMismatch(f"{path.name} has no checkpoint header")
        header = json.loads(str(archive[HEADER_KEY]))
        if header.get('format_version') != FORMAT_VERSION:
            raise SchemaMismatch(f"{path.name}: unsupported checkpoint format {header.get('format_version')}")
        params = {name: archive[name] for name in archive.files if name != HEADER_KEY}
    return header, params


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
