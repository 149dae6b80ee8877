"""Per-output-directory record of what each command wrote."""

import json
import platform
from importlib import metadata
from pathlib import Path

from . import __version__
from .diffcore.checkpoint import file_hash

MANIFEST_NAME = 'manifest.json'
PACKAGES = ('numpy', 'pandas', 'shapely', 'click', 'loguru')


def versions() -> dict[str, str]:
    found = {'epcfusion': __version__, 'python': platform.python_version()}
    for name in PACKAGES:
        try:
            found[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            found[name] = 'missing'
    return found


def record(output_dir: Path, command: str, config_hash: str, seed: int, artifacts: list[Path],
           extra: dict | None = None) -> Path:
    """Add or replace *command*'s entry; artifacts are listed with their
    sha256 so reruns can be compared byte for byte."""
    output_dir = Path(output_dir)
    path = output_dir / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding='utf-8')) if path.exists() else {}
    manifest.setdefault('commands', {})[command] = {
        'config_hash': config_hash,
        'seed': seed,
        'versions': versions(),
        'artifacts': {Path(a).name: file_hash(a) for a in sorted(artifacts, key=lambda p: Path(p).name)},
        **(extra or {}),
    }
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + '\n', encoding='utf-8')
    return path
