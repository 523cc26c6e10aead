"""
Social-media text normalisation and tokenisation.

Order of the normalisation rules:

1. lowercase, curly apostrophes folded to ``'``
2. drop @usernames and URLs, drop the ``#`` marker but keep the hashtag body
3. expand contractions (apostrophes are still present at this point)
4. drop digits; drop remaining apostrophes ("ticks") without a space;
   every other non ``[a-z]`` character becomes a space
5. collapse letter runs longer than ``max_repeat``
6. join configured compounds ("action sa" -> "actionsa")
7. collapse whitespace
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from django.core.exceptions import ValidationError
from nltk.stem import PorterStemmer

from .conf import load_toml, read_contractions, read_word_list, resource_path

logger = logging.getLogger(__name__)

_MENTION_RE = re.compile(r'@\w+')
_URL_RE = re.compile(r'https?://\S+|www\.\S+')
_DIGIT_RE = re.compile(r'[0-9]+')
_TICK_RE = re.compile(r"'")
_NON_ALPHA_RE = re.compile(r'[^a-z\s]+')
_SPACE_RE = re.compile(r'\s+')
_TOKEN_RE = re.compile(r'^[a-z0-9]+$')

# Short tokens ("anc", "eff") are acronyms more often than inflected words.
STEM_MIN_LENGTH = 4


@dataclass(frozen=True)
class PrepConfig:
    stopwords: frozenset = frozenset()
    contractions: dict = field(default_factory=dict)
    compound_joins: tuple = (('action', 'sa'),)
    max_repeat: int = 2
    stem: bool = True

    def __post_init__(self):
        if self.max_repeat < 1:
            raise ValidationError(f"max_repeat must be >= 1, got {self.max_repeat}")
        for parts in self.compound_joins:
            if len(parts) < 2 or any(p != p.lower() or not p for p in parts):
                raise ValidationError(f"compound join keys must be lowercase words: {parts!r}")

    @classmethod
    def from_mapping(cls, mapping=None):
        """Build from a PREP settings section; missing lists use the bundled resources."""
        mapping = dict(mapping or {})
        stopwords_file = mapping.get('stopwords_file') or resource_path('stopwords.txt')
        contractions_file = mapping.get('contractions_file') or resource_path('contractions.txt')
        stopwords = mapping.get('stopwords')
        if stopwords is None:
            stopwords = read_word_list(stopwords_file)
        contractions = mapping.get('contractions')
        if contractions is None:
            contractions = read_contractions(contractions_file)
        joins = mapping.get('compound_joins', [['action', 'sa']])
        return cls(
            stopwords=frozenset(w.lower() for w in stopwords),
            contractions={k.lower(): v.lower() for k, v in contractions.items()},
            compound_joins=tuple(tuple(p.lower() for p in pair) for pair in joins),
            max_repeat=int(mapping.get('max_repeat', 2)),
            stem=bool(mapping.get('stem', True)),
        )

    @classmethod
    def from_toml(cls, path):
        data = load_toml(path)
        section = data.get('prep', data.get('PREP', data))
        base = Path(path).parent
        for key in ('stopwords_file', 'contractions_file'):
            if section.get(key):
                section[key] = base / section[key]
        return cls.from_mapping(section)

    @classmethod
    def default(cls):
        return cls.from_mapping({})


@dataclass(frozen=True)
class ProcessedDoc:
    id: str
    tokens: tuple
    party: object = None
    label: object = None
    provenance: object = None


@lru_cache(maxsize=32)
def _contraction_pattern(keys):
    if not keys:
        return None
    alternatives = '|'.join(re.escape(k) for k in sorted(keys, key=len, reverse=True))
    return re.compile(rf"(?<![a-z'])(?:{alternatives})(?![a-z'])")


@lru_cache(maxsize=32)
def _compound_patterns(joins):
    return [
        (re.compile(r'\b' + r'\s+'.join(re.escape(p) for p in parts) + r'\b'), ''.join(parts))
        for parts in joins
    ]


def normalize(text, config):
    text = text.lower().replace('’', "'").replace('‘', "'")
    text = _URL_RE.sub(' ', text)
    text = _MENTION_RE.sub(' ', text)
    text = text.replace('#', ' ')

    pattern = _contraction_pattern(frozenset(config.contractions))
    if pattern is not None:
        text = pattern.sub(lambda m: config.contractions[m.group(0)], text)

    text = _DIGIT_RE.sub(' ', text)
    text = _TICK_RE.sub('', text)
    # Emoji and any other non-ASCII characters go here too.
    text = _NON_ALPHA_RE.sub(' ', text)

    run = re.compile(r'([a-z])\1{%d,}' % config.max_repeat)
    text = run.sub(lambda m: m.group(1) * config.max_repeat, text)

    for compound, joined in _compound_patterns(config.compound_joins):
        text = compound.sub(joined, text)
    return _SPACE_RE.sub(' ', text).strip()


def tokenize(text):
    return text.split()


def remove_stopwords(tokens, config):
    return [token for token in tokens if token not in config.stopwords]


_STEMMER = PorterStemmer()


@lru_cache(maxsize=200000)
def stem_token(token):
    if len(token) < STEM_MIN_LENGTH:
        return token
    # Porter is iterated to its fixed point so that stemming is idempotent.
    current = token
    for _ in range(10):
        nxt = _STEMMER.stem(current)
        if nxt == current or len(nxt) < STEM_MIN_LENGTH:
            current = nxt
            break
        current = nxt
    return current


def stem(tokens):
    return [stem_token(token) for token in tokens]


def run_pipeline(doc, config):
    tokens = remove_stopwords(tokenize(normalize(doc.text, config)), config)
    if config.stem:
        # Stems can collide with stop words ("doing" -> "do").
        tokens = remove_stopwords(stem(tokens), config)
    tokens = [token for token in tokens if _TOKEN_RE.match(token)]
    return ProcessedDoc(
        id=doc.id,
        tokens=tuple(tokens),
        party=doc.party,
        label=doc.label,
        provenance=doc.provenance,
    )


def run_corpus(documents, config, workers=1):
    """Process a whole collection; output order always matches input order."""
    docs = list(documents)
    if workers <= 1 or len(docs) < 1000:
        return [run_pipeline(doc, config) for doc in docs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda d: run_pipeline(d, config), docs, chunksize=256))
