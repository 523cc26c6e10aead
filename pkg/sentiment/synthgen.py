"""
Synthetic labeled corpora with a controllable separability dial.

Each document gets a true class; every token is drawn from that class's
lexicon with probability ``sentiment_word_rate`` and from the noise lexicon
otherwise. Generated words are pronounceable nonsense built so that the
stemmer and the stop-word list leave them untouched.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .corpus import Document, DocumentSet, write_documents
from .models import Party, Provenance, Role, Sentiment

logger = logging.getLogger(__name__)

_ONSETS = 'bdfgklmnprtvz'
_VOWELS = 'aou'
_CODAS = 'bdgkpz'


def pseudo_words(count, seed=0):
    """``count`` distinct CVCVC words; suffix-free so Porter stemming is a no-op."""
    rng = np.random.default_rng(seed)
    words = []
    seen = set()
    while len(words) < count:
        word = (
            rng.choice(list(_ONSETS)) + rng.choice(list(_VOWELS))
            + rng.choice(list(_ONSETS)) + rng.choice(list(_VOWELS))
            + rng.choice(list(_CODAS))
        )
        if word not in seen:
            seen.add(word)
            words.append(str(word))
    return words


def default_lexicons(pos=40, neg=40, noise=200, seed=0):
    words = pseudo_words(pos + neg + noise, seed)
    return tuple(words[:pos]), tuple(words[pos:pos + neg]), tuple(words[pos + neg:])


_POS, _NEG, _NOISE = default_lexicons()


@dataclass(frozen=True)
class GenSpec:
    n_docs: int = 2000
    parties: tuple = tuple(p.value for p in Party.main_parties())
    pos_lexicon: tuple = _POS
    neg_lexicon: tuple = _NEG
    noise_lexicon: tuple = _NOISE
    sentiment_word_rate: float = 0.6
    doc_length: tuple = (8, 20)
    label_fraction: float = 0.05
    positive_share: float = 0.5
    holdout_size: int = 200
    seed: int = 1

    def __post_init__(self):
        lexicons = {'pos': set(self.pos_lexicon), 'neg': set(self.neg_lexicon),
                    'noise': set(self.noise_lexicon)}
        for name, words in lexicons.items():
            if not words:
                raise ValidationError(f"{name} lexicon is empty")
        if lexicons['pos'] & lexicons['neg'] or lexicons['pos'] & lexicons['noise'] \
                or lexicons['neg'] & lexicons['noise']:
            raise ValidationError('lexicons must be pairwise disjoint')
        if not 0 < self.sentiment_word_rate <= 1:
            raise ValidationError('sentiment_word_rate must lie in (0, 1]')
        if not 0 <= self.label_fraction <= 1 or not 0 < self.positive_share < 1:
            raise ValidationError('label_fraction must lie in [0, 1], positive_share in (0, 1)')
        low, high = self.doc_length
        if not 1 <= low <= high:
            raise ValidationError(f"doc_length must satisfy 1 <= min <= max, got {self.doc_length}")
        if self.n_docs < 1 or self.holdout_size < 0 or not self.parties:
            raise ValidationError('n_docs must be >= 1 with at least one party')

    @classmethod
    def from_mapping(cls, mapping=None):
        known = set(cls.__dataclass_fields__)
        values = {k: v for k, v in (mapping or {}).items() if k in known}
        for key in ('parties', 'pos_lexicon', 'neg_lexicon', 'noise_lexicon', 'doc_length'):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)


@dataclass
class SyntheticCorpus:
    """``documents`` carry their true labels; ``visible[i]`` marks a seed label."""
    documents: DocumentSet
    visible: np.ndarray
    holdout: DocumentSet = field(default=None)

    def seeds(self):
        return self.documents.derive(
            [replace(d, provenance=Provenance.MANUAL)
             for d, shown in zip(self.documents, self.visible) if shown],
            role=Role.C,
        )

    def unlabeled(self):
        return self.documents.derive(
            [replace(d, label=None, provenance=None)
             for d, shown in zip(self.documents, self.visible) if not shown],
            role=Role.B,
        )

    def truth(self):
        docs = list(self.documents) + (list(self.holdout) if self.holdout else [])
        return {d.id: d.label for d in docs}


def _document(rng, spec, doc_id):
    positive = rng.random() < spec.positive_share
    lexicon = spec.pos_lexicon if positive else spec.neg_lexicon
    length = int(rng.integers(spec.doc_length[0], spec.doc_length[1] + 1))
    tokens = []
    for _ in range(length):
        source = lexicon if rng.random() < spec.sentiment_word_rate else spec.noise_lexicon
        tokens.append(source[int(rng.integers(len(source)))])
    return Document(
        id=doc_id,
        text=' '.join(tokens),
        party=Party(spec.parties[int(rng.integers(len(spec.parties)))]),
        label=Sentiment.POSITIVE if positive else Sentiment.NEGATIVE,
        source='synthetic',
        provenance=Provenance.MANUAL,
    )


def generate(spec):
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.n_docs + spec.holdout_size))
    docs = [_document(rng, spec, f"s{i:0{width}d}") for i in range(spec.n_docs)]
    holdout = [_document(rng, spec, f"h{i:0{width}d}") for i in range(spec.holdout_size)]

    n_visible = int(round(spec.n_docs * spec.label_fraction))
    visible = np.zeros(spec.n_docs, dtype=bool)
    visible[rng.choice(spec.n_docs, size=n_visible, replace=False)] = True
    logger.info("synthetic corpus: %d docs, %d visible labels, %d hold-out",
                spec.n_docs, n_visible, spec.holdout_size)
    return SyntheticCorpus(
        DocumentSet(docs, role=Role.A), visible,
        DocumentSet(holdout, role=Role.D) if holdout else None,
    )


def lexicon_oracle(doc, spec):
    """Majority vote of lexicon hits; ties and misses go to Positive."""
    tokens = doc.text.split()
    positive, negative = set(spec.pos_lexicon), set(spec.neg_lexicon)
    pos = sum(1 for t in tokens if t in positive)
    neg = sum(1 for t in tokens if t in negative)
    return Sentiment.NEGATIVE if neg > pos else Sentiment.POSITIVE


def write_corpus(corpus, out_dir):
    """seeds.jsonl, unlabeled.jsonl, holdout.jsonl and the truth.csv sidecar."""
    out_dir = Path(out_dir)
    paths = {
        'seeds': write_documents(corpus.seeds(), out_dir / 'seeds.jsonl'),
        'unlabeled': write_documents(corpus.unlabeled(), out_dir / 'unlabeled.jsonl'),
    }
    if corpus.holdout:
        paths['holdout'] = write_documents(corpus.holdout, out_dir / 'holdout.jsonl')
    truth = corpus.truth()
    frame = pd.DataFrame({'id': list(truth), 'label': [label.value for label in truth.values()]})
    paths['truth'] = out_dir / 'truth.csv'
    frame.to_csv(paths['truth'], index=False, lineterminator='\n')
    return paths
