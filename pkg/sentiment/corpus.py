"""
Document collections: ingestion, de-duplication, language filtering, party
tagging and the A/B/C/D dataset roles.

Roles (sizes in the local-election tweet collection, see ``ROLE_REFERENCE_COUNTS``):

- A: the complete corpus, labeled and unlabeled, used to fit representations
- B: the four-party prediction set; every document carries exactly one party
- C: annotated seed set used to train label propagation
- D: annotated hold-out set, never used for training
"""
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .conf import read_word_list, resource_path
from .exceptions import DataError
from .models import Party, Provenance, Role, Sentiment

logger = logging.getLogger(__name__)

ROLE_REFERENCE_COUNTS = {
    Role.A: 681029,
    Role.B: 401916,
    Role.C: 1669,
    Role.D: 372,
}

FORMATS = ('jsonl', 'csv')

_MENTION_RE = re.compile(r'@\w+')
_URL_RE = re.compile(r'https?://\S+|www\.\S+')
_WORD_RE = re.compile(r"[a-z]+(?:'[a-z]+)?")
_TAG_TOKEN_RE = re.compile(r'[a-z0-9_]+')

# Keywords at least this long also match inside compound hashtags
# ("voteactionsa"); shorter ones ("da", "anc") and those listed under the
# lexicon's exact table must match a whole token.
SUBSTRING_MATCH_MIN = 5


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    party: Party | None = None
    label: Sentiment | None = None
    source: str = ''
    provenance: Provenance | None = None

    def to_record(self):
        return {
            'id': self.id,
            'text': self.text,
            'party': self.party.value if self.party else None,
            'label': self.label.value if self.label else None,
            'source': self.source,
            'provenance': self.provenance.value if self.provenance else None,
        }


@dataclass
class DocumentSet:
    documents: list
    role: Role = Role.A

    def __post_init__(self):
        self.documents = list(self.documents)
        seen = set()
        duplicates = []
        for doc in self.documents:
            if doc.id in seen:
                duplicates.append(doc.id)
            seen.add(doc.id)
        if duplicates:
            raise ValidationError(f"duplicate document ids: {duplicates[:10]}")
        if self.role in (Role.C, Role.D):
            unlabeled = [d.id for d in self.documents if d.label not in Sentiment.classes()]
            if unlabeled:
                raise ValidationError(
                    f"role {self.role} requires labels; unlabeled ids: {unlabeled[:10]}"
                )
        if self.role == Role.B:
            untagged = [d.id for d in self.documents if d.party not in Party.main_parties()]
            if untagged:
                raise ValidationError(
                    f"role B requires one of the four parties; offending ids: {untagged[:10]}"
                )

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def ids(self):
        return [doc.id for doc in self.documents]

    def by_id(self):
        return {doc.id: doc for doc in self.documents}

    def derive(self, documents, role=None):
        return DocumentSet(documents, role=self.role if role is None else role)


@dataclass(frozen=True)
class PartyLexicon:
    keywords: dict
    # Keywords that only ever match a whole token, hashtags included.
    exact: frozenset = frozenset()

    def __post_init__(self):
        owners = {}
        for party, words in self.keywords.items():
            for word in words:
                if word in owners and owners[word] != party:
                    raise ValidationError(
                        f"keyword {word!r} listed for both {owners[word]} and {party}"
                    )
                owners[word] = party
        stray = sorted(self.exact - set(owners))
        if stray:
            raise ValidationError(f"exact keywords not in any party list: {stray}")

    @classmethod
    def from_mapping(cls, mapping):
        """
        Party tables of keyword lists. An optional ``exact`` table names
        keywords (per party) that must match a whole token; they join the
        party's list if not already there.
        """
        def party_of(name):
            try:
                return Party(name)
            except ValueError as exc:
                raise ValidationError(f"unknown party in lexicon: {name!r}") from exc

        def normalize(words):
            return {w.strip().lower() for w in words if w.strip()}

        mapping = dict(mapping)
        exact_table = mapping.pop('exact', {})
        keywords = {party_of(name): normalize(words) for name, words in mapping.items()}
        exact = set()
        for name, words in exact_table.items():
            words = normalize(words)
            party = party_of(name)
            keywords[party] = keywords.get(party, set()) | words
            exact |= words
        return cls(
            {party: tuple(sorted(words)) for party, words in keywords.items()},
            frozenset(exact),
        )

    @classmethod
    def from_toml(cls, path):
        from .conf import load_toml
        return cls.from_mapping(load_toml(path))

    @classmethod
    def bundled(cls):
        return cls.from_toml(resource_path('party_lexicon.toml'))

    def matches(self, text):
        """Parties whose keywords occur in ``text``."""
        tokens = _TAG_TOKEN_RE.findall(text.lower())
        joined = ' ' + ' '.join(tokens) + ' '
        found = set()
        for party, words in self.keywords.items():
            for word in words:
                if ' ' in word:
                    hit = f' {word} ' in joined
                elif len(word) >= SUBSTRING_MATCH_MIN and word not in self.exact:
                    hit = any(word in token for token in tokens)
                else:
                    hit = word in tokens
                if hit:
                    found.add(party)
                    break
        return found


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str

    def to_record(self):
        return {'line': self.line, 'reason': self.reason}


@dataclass
class IngestResult:
    documents: DocumentSet
    rejects: list = field(default_factory=list)


@dataclass
class TaggingResult:
    documents: DocumentSet
    multi_party: list = field(default_factory=list)
    unmatched: list = field(default_factory=list)

    def exclusion_report(self):
        return {
            'tagged': len(self.documents),
            'multi_party': len(self.multi_party),
            'unmatched': len(self.unmatched),
            'multi_party_ids': self.multi_party,
            'unmatched_ids': self.unmatched,
        }


def _parse_enum(enum, value, what):
    if value is None or value == '':
        return None
    for member in enum:
        if str(value).strip().lower() == member.value.lower():
            return member
    raise ValueError(f"unknown {what} {value!r}")


def _record_to_document(record, source):
    """Build a Document from a parsed record; raises ValueError with a reason."""
    if not isinstance(record, dict):
        raise ValueError('record is not an object')
    doc_id = record.get('id')
    if isinstance(doc_id, int) and not isinstance(doc_id, bool):
        doc_id = str(doc_id)
    if not isinstance(doc_id, str) or not doc_id.strip():
        raise ValueError('missing id')
    text = record.get('text')
    if not isinstance(text, str) or not text.strip():
        raise ValueError('missing text')
    party = _parse_enum(Party, record.get('party'), 'party')
    label = _parse_enum(Sentiment, record.get('label'), 'label')
    if label == Sentiment.ABSTAIN:
        raise ValueError("label must be 'positive' or 'negative'")
    provenance = _parse_enum(Provenance, record.get('provenance'), 'provenance')
    if label and provenance is None:
        provenance = Provenance.MANUAL
    if not label:
        provenance = None
    return Document(
        id=doc_id,
        text=text,
        party=party,
        label=label,
        source=source if record.get('source') is None else str(record['source']),
        provenance=provenance,
    )


def _iter_jsonl(path):
    with open(path, 'rb') as handle:
        for number, raw in enumerate(handle, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as exc:
                yield number, ValueError(f'invalid UTF-8 at byte {exc.start}')
                continue
            if not line.strip():
                continue
            try:
                yield number, json.loads(line)
            except json.JSONDecodeError as exc:
                yield number, ValueError(f'invalid JSON: {exc.msg}')


# Stands in for a row with too many fields so it keeps its position.
_BAD_ROW = '\x00malformed:'


def _iter_csv(path):
    try:
        header = pd.read_csv(path, nrows=0, dtype=str)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable CSV {path}: {exc}") from exc
    missing = {'id', 'text'} - set(header.columns)
    if missing:
        raise DataError(f"CSV {path} lacks required columns: {sorted(missing)}")
    columns = list(header.columns)
    width = len(columns)

    def mark_bad_row(fields):
        return [f'{_BAD_ROW}{len(fields)}'] * width

    # The header is read as row 0 so it fixes the width; wider rows go to
    # mark_bad_row in place.
    try:
        frame = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False,
            engine='python', on_bad_lines=mark_bad_row,
        )
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable CSV {path}: {exc}") from exc
    # Line numbers count the header as line 1.
    for number, values in enumerate(frame.to_numpy().tolist()[1:], start=2):
        values = [v if isinstance(v, str) else '' for v in values]
        if values[0].startswith(_BAD_ROW):
            seen = values[0][len(_BAD_ROW):]
            yield number, ValueError(f'expected {width} fields, saw {seen}')
        else:
            yield number, dict(zip(columns, values))


def ingest(path, format=None, role=Role.A):
    """
    Read a JSONL or CSV corpus.

    Malformed records never stop the read: each one becomes a ``Reject``
    carrying its line number. Records are kept in file order.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    fmt = (format or path.suffix.lstrip('.')).lower()
    if fmt not in FORMATS:
        raise DataError(f"unknown corpus format {fmt!r}; expected one of {FORMATS}")
    rows = _iter_jsonl(path) if fmt == 'jsonl' else _iter_csv(path)

    documents, rejects, seen = [], [], set()
    for number, record in rows:
        try:
            if isinstance(record, Exception):
                raise record
            doc = _record_to_document(record, str(path))
            if doc.id in seen:
                raise ValueError(f'duplicate id {doc.id!r}')
        except ValueError as exc:
            rejects.append(Reject(number, str(exc)))
            continue
        seen.add(doc.id)
        documents.append(doc)

    if rejects:
        logger.warning("%s: %d malformed records rejected", path, len(rejects))
    try:
        return IngestResult(DocumentSet(documents, role=role), rejects)
    except ValidationError as exc:
        raise DataError(f"{path}: {exc.messages[0]}") from exc


def write_documents(documents, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        for doc in documents:
            handle.write(json.dumps(doc.to_record(), ensure_ascii=False) + '\n')
    return path


def write_rejects(rejects, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        for reject in rejects:
            handle.write(json.dumps(reject.to_record()) + '\n')
    return path


def dedupe(documents):
    """Drop exact duplicate texts (after trimming), keeping first occurrences."""
    seen = set()
    kept = []
    for doc in documents:
        key = doc.text.strip()
        if key in seen:
            continue
        seen.add(key)
        kept.append(doc)
    return documents.derive(kept)


_FUNCTION_WORDS = None


def function_words():
    global _FUNCTION_WORDS
    if _FUNCTION_WORDS is None:
        _FUNCTION_WORDS = frozenset(read_word_list(resource_path('function_words.txt')))
    return _FUNCTION_WORDS


def english_ratio(text, vocabulary=None):
    vocabulary = function_words() if vocabulary is None else vocabulary
    cleaned = _URL_RE.sub(' ', _MENTION_RE.sub(' ', text.lower()))
    tokens = _WORD_RE.findall(cleaned)
    if not tokens:
        return 0.0
    return sum(1 for token in tokens if token in vocabulary) / len(tokens)


def filter_language(documents, threshold=0.15):
    """Keep documents whose function-word ratio reaches ``threshold``."""
    if not 0 <= threshold <= 1:
        raise ValidationError(f"language threshold must lie in [0, 1], got {threshold}")
    vocabulary = function_words()
    kept = []
    for doc in documents:
        ratio = english_ratio(doc.text, vocabulary)
        # Token-less documents never pass, whatever the threshold.
        if ratio >= threshold and _WORD_RE.search(doc.text.lower()):
            kept.append(doc)
    dropped = len(documents) - len(kept)
    if dropped:
        logger.info("language filter dropped %d of %d documents", dropped, len(documents))
    return documents.derive(kept)


def tag_party(documents, lexicon):
    """
    Assign each document the single party it mentions.

    Documents mentioning two or more parties, or none, are left out of the
    role-B output and listed in the exclusion report.
    """
    tagged, multi, unmatched = [], [], []
    for doc in documents:
        parties = lexicon.matches(doc.text) & set(Party.main_parties())
        if len(parties) == 1:
            tagged.append(replace(doc, party=parties.pop()))
        elif parties:
            multi.append(doc.id)
        else:
            unmatched.append(doc.id)
    logger.info(
        "party tagging: %d tagged, %d multi-party, %d unmatched",
        len(tagged), len(multi), len(unmatched),
    )
    return TaggingResult(DocumentSet(tagged, role=Role.B), multi, unmatched)


def _stratum_key(doc, stratify):
    if stratify == 'party':
        return (doc.party.value if doc.party else '',)
    if stratify == 'label':
        return (doc.label.value if doc.label else '',)
    if stratify == 'party+label':
        return (doc.party.value if doc.party else '', doc.label.value if doc.label else '')
    raise ValidationError(f"unknown stratification {stratify!r}")


def _largest_remainder(sizes, total):
    population = sum(sizes)
    if population == 0:
        return [0] * len(sizes)
    exact = [size * total / population for size in sizes]
    quotas = [int(np.floor(value)) for value in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in order[:total - sum(quotas)]:
        quotas[i] += 1
    return quotas


def split(documents, seed, train_size, test_size, stratify=None):
    """
    Draw disjoint C (train) and D (test) samples without replacement.

    Returns ``(C, D, rest)``; each keeps the input order of its members.
    """
    n = len(documents)
    if train_size < 0 or test_size < 0 or train_size + test_size > n:
        raise DataError(
            f"split sizes {train_size}+{test_size} exceed population of {n}"
        )
    rng = np.random.default_rng(seed)
    if stratify is None:
        order = rng.permutation(n)
        train_idx = set(order[:train_size].tolist())
        test_idx = set(order[train_size:train_size + test_size].tolist())
    else:
        strata = {}
        for i, doc in enumerate(documents):
            strata.setdefault(_stratum_key(doc, stratify), []).append(i)
        keys = sorted(strata)
        sizes = [len(strata[k]) for k in keys]
        train_quota = _largest_remainder(sizes, train_size)
        test_quota = _largest_remainder(
            [s - q for s, q in zip(sizes, train_quota)], test_size
        )
        train_idx, test_idx = set(), set()
        for key, n_train, n_test in zip(keys, train_quota, test_quota):
            members = [strata[key][j] for j in rng.permutation(len(strata[key]))]
            train_idx.update(members[:n_train])
            test_idx.update(members[n_train:n_train + n_test])

    docs = documents.documents
    try:
        train = DocumentSet([docs[i] for i in range(n) if i in train_idx], role=Role.C)
        test = DocumentSet([docs[i] for i in range(n) if i in test_idx], role=Role.D)
    except ValidationError as exc:
        raise DataError(exc.messages[0]) from exc
    rest = documents.derive(
        [docs[i] for i in range(n) if i not in train_idx and i not in test_idx]
    )
    return train, test, rest
