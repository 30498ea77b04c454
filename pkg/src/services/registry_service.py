import json
from pathlib import Path

from models.run_record import RunRecord
from utils.json_utils import read_json, to_builtin
from utils.logging_utils import log_error, log_success, log_warning

MANIFEST_NAME = "run_record.json"


class RegistryService:
    """
    Service responsable de la persistance des RunRecord dans le registre SQLite.

    Les manifestes run_record.json restent la source de vérité: le registre est
    un index reconstruit à partir d'eux (upsert par identifiant de run).
    """

    def __init__(self, db_session):
        """
        Args:
            db_session: Session SQLAlchemy active sur le registre
        """
        self.db = db_session

    def get_run(self, run_id):
        return self.db.get(RunRecord, run_id)

    def get_all_runs(self):
        """Tous les runs, groupés par type puis triés par hash de configuration."""
        return (
            self.db.query(RunRecord)
            .order_by(RunRecord.kind, RunRecord.config_hash, RunRecord.id)
            .all()
        )

    def upsert(self, manifest, directory):
        """
        Crée ou met à jour l'entrée d'un run à partir de son manifeste.

        Args:
            manifest (dict): Contenu de run_record.json
            directory (str | Path): Répertoire du run

        Returns:
            RunRecord: L'entrée persistée

        Raises:
            KeyError: Si un champ obligatoire manque dans le manifeste
        """
        try:
            record = self.get_run(manifest["run_id"])
            if record is None:
                record = RunRecord(id=manifest["run_id"])
                self.db.add(record)
            record.kind = manifest["kind"]
            record.config_hash = manifest["config_hash"]
            record.seed = manifest["seed"]
            record.seed_source = manifest.get("seed_source", "config")
            record.tool_version = manifest["tool_version"]
            record.started_at = manifest["started_at"]
            record.finished_at = manifest.get("finished_at")
            record.status = manifest.get("status", "success")
            record.directory = str(directory)
            record.metrics = json.dumps(to_builtin(manifest.get("metrics", {})), sort_keys=True)
            record.files = json.dumps(manifest.get("files", []))
            record.config = json.dumps(to_builtin(manifest.get("config", {})), sort_keys=True)
            self.db.commit()
            return record

        except Exception as e:
            self.db.rollback()
            log_error(action="registry_upsert", exception=e, run_id=manifest.get("run_id"))
            raise e

    def sync(self, output_dir):
        """
        Réindexe tous les manifestes trouvés dans un répertoire de sortie.

        Les entrées dont le manifeste a disparu sont retirées; un manifeste
        illisible est ignoré avec un avertissement.

        Returns:
            int: Nombre de runs indexés
        """
        output_dir = Path(output_dir)
        seen = set()
        for path in sorted(output_dir.glob(f"*/{MANIFEST_NAME}")):
            try:
                manifest = read_json(path)
                self.upsert(manifest, path.parent)
                seen.add(manifest["run_id"])
            except (ValueError, KeyError, TypeError) as e:
                log_warning(
                    action="registry_sync",
                    message=f"Manifeste ignoré: {path} ({e})",
                    path=str(path),
                )

        stale = [record for record in self.db.query(RunRecord).all() if record.id not in seen]
        for record in stale:
            self.db.delete(record)
        self.db.commit()

        log_success(
            action="registry_sync",
            message=f"Registre synchronisé: {len(seen)} run(s)",
            output_dir=str(output_dir),
            removed=len(stale),
        )
        return len(seen)

    def delete(self, run_id):
        """Retire un run du registre (sans effet s'il est absent)."""
        record = self.get_run(run_id)
        if record is not None:
            self.db.delete(record)
            self.db.commit()

    def close(self):
        bind = self.db.get_bind()
        self.db.close()
        bind.dispose()
