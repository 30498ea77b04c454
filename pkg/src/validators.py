"""
Validateurs des champs de configuration des expériences.

Chaque validateur lève une ConfigError qui nomme le champ et la borne violée.
"""
import math
import numbers

from core.exceptions import ConfigError


class Validator:
    """Classe de base: validate(field, value) lève ConfigError si la valeur est invalide."""

    def validate(self, field, value):
        raise NotImplementedError


class IntegerValidator(Validator):
    def __init__(self, minimum=None, maximum=None):
        self.minimum = minimum
        self.maximum = maximum

    def validate(self, field, value):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ConfigError(f"{field}: entier attendu, reçu {value!r}", field)
        if self.minimum is not None and value < self.minimum:
            raise ConfigError(f"{field}: doit être ≥ {self.minimum} (reçu {value})", field)
        if self.maximum is not None and value > self.maximum:
            raise ConfigError(f"{field}: doit être ≤ {self.maximum} (reçu {value})", field)


class RealValidator(Validator):
    """
    Réel fini borné.

    Args:
        minimum, maximum (float, optional): Bornes
        strict (bool): Si vrai, la borne minimale est exclue
    """

    def __init__(self, minimum=None, maximum=None, strict=False):
        self.minimum = minimum
        self.maximum = maximum
        self.strict = strict

    def validate(self, field, value):
        if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
            raise ConfigError(f"{field}: réel fini attendu, reçu {value!r}", field)
        if self.minimum is not None:
            if self.strict and value <= self.minimum:
                raise ConfigError(f"{field}: doit être > {self.minimum} (reçu {value})", field)
            if not self.strict and value < self.minimum:
                raise ConfigError(f"{field}: doit être ≥ {self.minimum} (reçu {value})", field)
        if self.maximum is not None and value > self.maximum:
            raise ConfigError(f"{field}: doit être ≤ {self.maximum} (reçu {value})", field)


class ChoiceValidator(Validator):
    def __init__(self, choices):
        self.choices = tuple(choices)

    def validate(self, field, value):
        if value not in self.choices:
            raise ConfigError(f"{field}: valeur {value!r} hors de {', '.join(map(str, self.choices))}", field)


class BooleanValidator(Validator):
    def validate(self, field, value):
        if not isinstance(value, bool):
            raise ConfigError(f"{field}: booléen attendu, reçu {value!r}", field)


class ListValidator(Validator):
    """Liste dont chaque élément est vérifié par un validateur d'élément."""

    def __init__(self, item_validator, min_length=0, optional=False):
        self.item_validator = item_validator
        self.min_length = min_length
        self.optional = optional

    def validate(self, field, value):
        if value is None and self.optional:
            return
        if not isinstance(value, list):
            raise ConfigError(f"{field}: liste attendue, reçu {value!r}", field)
        if len(value) < self.min_length:
            raise ConfigError(f"{field}: au moins {self.min_length} élément(s) attendu(s)", field)
        for i, item in enumerate(value):
            self.item_validator.validate(f"{field}[{i}]", item)


class MappingValidator(Validator):
    """Dictionnaire à clés dans un ensemble donné (ou libres) et valeurs validées."""

    def __init__(self, value_validator, keys=None, optional=False):
        self.value_validator = value_validator
        self.keys = keys
        self.optional = optional

    def validate(self, field, value):
        if value is None and self.optional:
            return
        if not isinstance(value, dict):
            raise ConfigError(f"{field}: objet attendu, reçu {value!r}", field)
        for key, item in value.items():
            if self.keys is not None and key not in self.keys:
                raise ConfigError(f"{field}: clé inconnue {key!r}", f"{field}.{key}")
            self.value_validator.validate(f"{field}.{key}", item)


class StringValidator(Validator):
    def __init__(self, allow_empty=False, optional=False):
        self.allow_empty = allow_empty
        self.optional = optional

    def validate(self, field, value):
        if value is None and self.optional:
            return
        if not isinstance(value, str) or (not value and not self.allow_empty):
            raise ConfigError(f"{field}: chaîne non vide attendue, reçu {value!r}", field)
