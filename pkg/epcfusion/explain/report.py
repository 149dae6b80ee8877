"""Attribution results and their CSV/JSON artifacts."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd


@dataclass
class AttributionReport:
    """One analysis: a frame of importances per feature / field / point,
    plus the provenance every artifact carries."""
    kind: str
    values: pd.DataFrame
    n_samples: int
    seed: int
    checkpoint_hash: str = ''
    background: str = ''
    extra: dict = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        out = self.values.copy()
        out['seed'] = self.seed
        out['checkpoint'] = self.checkpoint_hash
        return out

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.frame().to_csv(path, index=False, float_format='%.10g')
        return path

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'n_samples': self.n_samples, 'seed': self.seed,
                'checkpoint': self.checkpoint_hash, 'background': self.background,
                'values': self.values.to_dict('records'), **self.extra}

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + '\n', encoding='utf-8')
        return path
