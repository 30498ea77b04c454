import json
import os
from dataclasses import fields

from core.exceptions import ConfigError
from models.experiment_config import PARAMS_BY_KIND, ExperimentConfig
from validators import IntegerValidator, StringValidator

TOP_LEVEL_KEYS = ("kind", "params", "seed", "output_dir")
SEED_VALIDATOR = IntegerValidator(0, 2**32 - 1)
SEED_ENV = "GEOLAB_SEED"


class ConfigService:
    """
    Service responsable de la lecture et de la validation des configurations.

    Une configuration est un document JSON:
    {"kind": ..., "params": {...}, "seed": 0, "output_dir": "results"}.
    Les clés inconnues sont refusées et chaque paramètre est validé à la
    lecture; les valeurs absentes prennent leur valeur par défaut.
    """

    def parse_config(self, text):
        """
        Lit et valide une configuration.

        Args:
            text (str | bytes): Contenu du fichier (JSON UTF-8)

        Returns:
            ExperimentConfig: Configuration complète

        Raises:
            ConfigError: JSON invalide, clé inconnue ou contrainte violée
        """
        if isinstance(text, bytes):
            try:
                text = text.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ConfigError(f"Le fichier de configuration n'est pas en UTF-8: {e}")
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON invalide (ligne {e.lineno}, colonne {e.colno}): {e.msg}")
        if not isinstance(document, dict):
            raise ConfigError("La configuration doit être un objet JSON")

        for key in document:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"Clé inconnue: {key!r}", key)

        if "kind" not in document:
            raise ConfigError("Champ obligatoire manquant: 'kind'", "kind")
        kind = document["kind"]
        if kind not in PARAMS_BY_KIND:
            raise ConfigError(
                f"kind: {kind!r} inconnu (attendus: {', '.join(PARAMS_BY_KIND)})", "kind"
            )

        seed = document.get("seed", 0)
        SEED_VALIDATOR.validate("seed", seed)
        output_dir = document.get("output_dir", "results")
        StringValidator().validate("output_dir", output_dir)

        params = self.parse_params(kind, document.get("params", {}))
        return ExperimentConfig(kind=kind, params=params, seed=seed, output_dir=output_dir)

    def parse_params(self, kind, values):
        """
        Construit le bloc de paramètres d'un type d'expérience.

        Les réels fournis sous forme d'entiers sont convertis en float pour que
        la forme canonique (et donc le hash) ne dépende pas de l'écriture.
        """
        params_class = PARAMS_BY_KIND[kind]
        if not isinstance(values, dict):
            raise ConfigError("params doit être un objet JSON", "params")

        known = {f.name: f for f in fields(params_class)}
        for key in values:
            if key not in known:
                raise ConfigError(f"Paramètre inconnu pour {kind}: {key!r}", key)

        arguments = {}
        for name, value in values.items():
            params_class.VALIDATORS[name].validate(name, value)
            if known[name].type is float:
                value = float(value)
            arguments[name] = value

        params = params_class(**arguments)
        problem = params.check()
        if problem:
            name, message = problem
            raise ConfigError(f"Paramètres {kind} incohérents: {message}", name)
        return params

    def load(self, path):
        """Lit un fichier de configuration depuis le disque."""
        try:
            with open(path, "rb") as handle:
                return self.parse_config(handle.read())
        except OSError as e:
            raise ConfigError(f"Impossible de lire {path}: {e.strerror}")

    def resolve_seed(self, config, cli_seed=None, environ=None):
        """
        Applique la précédence des graines: option --seed, puis GEOLAB_SEED,
        puis la graine du fichier.

        Returns:
            tuple[ExperimentConfig, str]: Configuration avec la graine effective
                et source de la graine ("cli", "env" ou "config")
        """
        environ = os.environ if environ is None else environ
        if cli_seed is not None:
            SEED_VALIDATOR.validate("--seed", cli_seed)
            return self._with_seed(config, cli_seed), "cli"
        raw = environ.get(SEED_ENV)
        if raw not in (None, ""):
            try:
                value = int(raw)
            except ValueError:
                raise ConfigError(f"{SEED_ENV}: entier attendu, reçu {raw!r}", SEED_ENV)
            SEED_VALIDATOR.validate(SEED_ENV, value)
            return self._with_seed(config, value), "env"
        return config, "config"

    def _with_seed(self, config, seed):
        return ExperimentConfig(kind=config.kind, params=config.params, seed=seed, output_dir=config.output_dir)
