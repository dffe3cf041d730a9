import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional

from pydantic import BaseModel, Field

from app import __version__
from app.utils.datafiles import sha256_file


class ProvenanceRecord(BaseModel):
    """Schema recording how an artifact was produced."""
    tool_version: str = __version__
    stage: str = Field(..., description="Pipeline stage that wrote the artifact")
    config: dict[str, Any] = Field(default_factory=dict)
    config_hash: str = ""
    input_hashes: dict[str, str] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    @staticmethod
    def hash_config(config: Mapping[str, Any]) -> str:
        """Stable SHA-256 of a JSON-serializable config mapping."""
        payload = json.dumps(config, sort_keys=True, default=str, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def build(
        cls,
        stage: str,
        config: Optional[Mapping[str, Any]] = None,
        inputs: Optional[Mapping[str, Path]] = None,
    ) -> "ProvenanceRecord":
        """Create a record, hashing the config and every input file."""
        config = dict(config or {})
        hashes = {}
        for name, path in (inputs or {}).items():
            path = Path(path)
            if path.is_file():
                hashes[name] = sha256_file(path)
            elif path.is_dir():
                digest = hashlib.sha256()
                for file in sorted(p for p in path.rglob("*") if p.is_file()):
                    digest.update(str(file.relative_to(path)).encode("utf-8"))
                    digest.update(sha256_file(file).encode("ascii"))
                hashes[name] = digest.hexdigest()
        return cls(
            stage=stage,
            config=config,
            config_hash=cls.hash_config(config),
            input_hashes=hashes,
        )
