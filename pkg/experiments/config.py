"""
Experiment configuration: YAML defaults, user file and --set overrides.
"""
import copy
import hashlib
import logging
from pathlib import Path

import yaml
from django.conf import settings

from lattice_snn.exceptions import ArtifactIOError, ConfigValidationError

logger = logging.getLogger(__name__)

CONFIG_FILENAME = 'config.yaml'
HASH_FILENAME = 'config.sha256'


def read_yaml(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactIOError(f"Missing config file {path}")
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigValidationError([f"{path}: not valid YAML ({e})"]) from e
    if not isinstance(data, dict):
        raise ConfigValidationError([f"{path}: top level must be a mapping of sections"])
    return data


def deep_merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text):
    """'section.key=value' -> {'section': {'key': value}}; value parsed as YAML."""
    path, sep, raw = text.partition('=')
    section, dot, key = path.strip().partition('.')
    if not sep or not dot or not section or not key:
        raise ConfigValidationError([f"--set {text!r}: expected section.key=value"])
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigValidationError([f"--set {text!r}: bad value ({e})"]) from e
    return {section: {key: value}}


def load_config(path=None, overrides=()):
    """Defaults, then the user file, then each override in order. Not yet validated."""
    config = read_yaml(settings.DEFAULT_EXPERIMENT_CONFIG)
    if path:
        config = deep_merge(config, read_yaml(path))
    for text in overrides:
        config = deep_merge(config, parse_override(text))
    return config


def dump_config(config):
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)


def config_hash(config):
    return hashlib.sha256(dump_config(config).encode('utf-8')).hexdigest()


def output_root(config):
    return Path(config['run'].get('output_root') or settings.OUTPUT_ROOT)


def experiment_dir(config):
    return output_root(config) / config['run']['name']


def run_dir(config, seed):
    return experiment_dir(config) / f"seed_{seed}"


def write_resolved(directory, config):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    (directory / CONFIG_FILENAME).write_text(dump_config(config), encoding='utf-8')
    (directory / HASH_FILENAME).write_text(digest + '\n', encoding='utf-8')
    return digest


def read_resolved(directory):
    """The config.yaml frozen into a run directory."""
    return read_yaml(Path(directory) / CONFIG_FILENAME)
