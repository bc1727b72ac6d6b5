import dataclasses
import json
from pathlib import Path


@dataclasses.dataclass
class TrainConfig:
    base_model: str = "distilbert-base-multilingual-cased"
    max_seq_len: int = 128
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    batch_size: int = 16
    epochs: int = 3
    seed: int = 0
    model_version: int = 0

    @classmethod
    def load(cls, path):
        """Reads a JSON file; unknown keys are an error, missing keys keep defaults."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)
