import json

from sqlalchemy import Column, Integer, String, Text

from database.config import Base


class RunRecord(Base):
    """
    Entrée du registre des runs.

    Les dates sont stockées en ISO 8601 pour que le registre puisse être
    reconstruit à l'identique depuis les manifestes run_record.json.
    """
    __tablename__ = "run_records"

    id = Column(String, primary_key=True)
    kind = Column(String, nullable=False, index=True)
    config_hash = Column(String(64), nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    seed_source = Column(String, nullable=False, default="config")
    tool_version = Column(String, nullable=False)

    # Dates (ISO 8601, UTC)
    started_at = Column(String, nullable=False)
    finished_at = Column(String)

    status = Column(String, nullable=False, default="success")
    directory = Column(String, nullable=False)

    # Blocs JSON du manifeste
    metrics = Column(Text, nullable=False, default="{}")
    files = Column(Text, nullable=False, default="[]")
    config = Column(Text, nullable=False, default="{}")

    @property
    def metrics_dict(self):
        return json.loads(self.metrics or "{}")

    @property
    def files_list(self):
        return json.loads(self.files or "[]")

    @property
    def config_dict(self):
        return json.loads(self.config or "{}")

    def to_manifest(self):
        """Forme run_record.json du run (clés triées à l'écriture)."""
        return {
            "run_id": self.id,
            "kind": self.kind,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "seed_source": self.seed_source,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "metrics": self.metrics_dict,
            "files": self.files_list,
            "config": self.config_dict,
        }

    def __repr__(self):
        return f"<RunRecord(id='{self.id}', kind='{self.kind}', status='{self.status}')>"
