"""
Pipeline configuration.

Defaults come from ``settings.SENTIMENT_PIPELINE``. A TOML file can override
any section (``[embed]``, ``[graph]`` ...) and command-line flags override
the file. Section names are case-insensitive.
"""
import copy
import hashlib
import json
import logging
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings

from .exceptions import DataError

logger = logging.getLogger(__name__)

RESOURCE_DIR = Path(__file__).resolve().parent / 'resources'

SECTIONS = (
    'LANGUAGE', 'PREP', 'VOCAB', 'TFIDF', 'EMBED', 'GRAPH',
    'BASELINE', 'SCHEDULE', 'LDA', 'NGRAMS',
)


def resource_path(name):
    return RESOURCE_DIR / name


def read_word_list(path):
    """One entry per line; blank lines and ``#`` comments ignored."""
    words = []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        line = line.strip()
        if line and not line.startswith('#'):
            words.append(line.lower())
    return words


def read_contractions(path):
    """Tab-separated ``contraction<TAB>expansion`` lines."""
    table = {}
    for number, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '\t' not in line:
            raise DataError(f"{path}:{number}: expected 'contraction<TAB>expansion'")
        key, value = line.split('\t', 1)
        table[key.strip().lower()] = value.strip().lower()
    return table


def load_toml(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        with path.open('rb') as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"invalid TOML in {path}: {exc}") from exc


def _upper_sections(data):
    out = {}
    for key, value in data.items():
        upper = key.upper()
        if upper in SECTIONS and isinstance(value, dict):
            out[upper] = dict(value)
        elif upper in ('THREADS', 'DETERMINISTIC'):
            out[upper] = value
        else:
            logger.warning("ignoring unknown config key %r", key)
    return out


def merge(base, overrides):
    """Section-wise merge; ``None`` values in overrides are skipped."""
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            for inner_key, inner_value in value.items():
                if inner_value is not None:
                    merged[key][inner_key] = inner_value
        elif value is not None:
            merged[key] = value
    return merged


def pipeline_config(config_path=None, overrides=None):
    """Resolve the effective configuration: settings < TOML file < flags."""
    config = copy.deepcopy(settings.SENTIMENT_PIPELINE)
    if config_path:
        config = merge(config, _upper_sections(load_toml(config_path)))
    if overrides:
        config = merge(config, overrides)
    if config.get('DETERMINISTIC'):
        config['EMBED'] = dict(config['EMBED'], workers=1)
    else:
        config['EMBED'] = dict(config['EMBED'], workers=max(1, int(config.get('THREADS', 1))))
    return config


def config_digest(config):
    """Stable sha256 over the canonical JSON form of a config mapping."""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
