"""
Artifact files passed between commands, and run manifests.

Every command writes ``<out_dir>/<command>.manifest.json`` holding the
config digest, seeds and sha256 digests of its inputs and outputs. Manifests
carry no timestamps, so identical runs produce identical manifests.
"""
import hashlib
import json
import logging
from pathlib import Path

import pandas as pd

from .exceptions import ArtifactFormatError, DataError
from .models import Party, Provenance, Sentiment
from .textprep import ProcessedDoc

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = '.manifest.json'
PROCESSED_HEADER = {'artifact': 'processed', 'producer': 'prep'}
LABELS_COLUMNS = ['id', 'party', 'label', 'confidence', 'iteration']


def file_digest(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def digests(paths):
    return {str(p): file_digest(p) for p in paths if p and Path(p).is_file()}


def detect_producer(path):
    """Best guess at the command that wrote ``path``; None when unknown."""
    path = Path(path)
    try:
        with path.open('rb') as handle:
            head = handle.read(512)
    except OSError:
        return None
    if head.startswith(b'W2VSENT1'):
        return 'embed'
    text = head.decode('utf-8', errors='replace')
    first = text.splitlines()[0] if text else ''
    if first.startswith('# n_docs='):
        return 'vocab'
    if first.startswith('doc_id,term_index,weight'):
        return 'tfidf'
    if first.startswith('src,dst,weight'):
        return 'propagate'
    if first.startswith(','.join(LABELS_COLUMNS)):
        return 'selflabel'
    if first.startswith('party,rank,ngram,count'):
        return 'ngrams'
    try:
        record = json.loads(first)
    except json.JSONDecodeError:
        return None
    if isinstance(record, dict):
        if 'producer' in record:
            return record['producer']
        if 'header' in record:
            return 'baseline'
        if 'id' in record and 'text' in record:
            return 'ingest'
        if 'iteration' in record and 'batch_ids' in record:
            return 'selflabel'
    return None


def _enum_or_none(enum, value):
    return enum(value) if value not in (None, '') else None


def write_processed(docs, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        handle.write(json.dumps(PROCESSED_HEADER, sort_keys=True) + '\n')
        for doc in docs:
            handle.write(json.dumps({
                'id': doc.id,
                'tokens': list(doc.tokens),
                'party': doc.party.value if doc.party else None,
                'label': doc.label.value if doc.label else None,
                'provenance': doc.provenance.value if doc.provenance else None,
            }, ensure_ascii=False) + '\n')
    return path


def read_processed(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"processed corpus not found: {path}")
    with path.open(encoding='utf-8') as handle:
        try:
            header = json.loads(handle.readline() or 'null')
        except json.JSONDecodeError:
            header = None
        if header != PROCESSED_HEADER:
            raise ArtifactFormatError(f"{path} is not a processed corpus; run `prep` first",
                                      producer=detect_producer(path))
        docs = []
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            docs.append(ProcessedDoc(
                id=record['id'],
                tokens=tuple(record['tokens']),
                party=_enum_or_none(Party, record.get('party')),
                label=_enum_or_none(Sentiment, record.get('label')),
                provenance=_enum_or_none(Provenance, record.get('provenance')),
            ))
    return docs


def write_labels(rows, path):
    """``rows``: dicts with the LABELS_COLUMNS keys, written in the given order."""
    frame = pd.DataFrame(list(rows), columns=LABELS_COLUMNS)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.6f', lineterminator='\n')
    return path


def read_label_map(path, drop_seed_rows=False):
    """
    ``{id: Sentiment}`` from a labels CSV (``id,label`` columns at least) or
    a labeled documents JSONL. ``drop_seed_rows`` skips CSV rows of
    iteration 0 (manual seeds) and JSONL records with manual provenance.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"label file not found: {path}")
    if path.suffix.lower() == '.csv':
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        if not {'id', 'label'} <= set(frame.columns):
            raise ArtifactFormatError(f"{path} lacks id/label columns", producer=detect_producer(path))
        if drop_seed_rows and 'iteration' in frame.columns:
            frame = frame[frame['iteration'] != '0']
        pairs = zip(frame['id'], frame['label'])
    else:
        pairs = []
        with path.open(encoding='utf-8') as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                if 'id' not in record:
                    raise ArtifactFormatError(f"{path} is not a labeled document file",
                                              producer=detect_producer(path))
                if drop_seed_rows and record.get('provenance') == Provenance.MANUAL.value:
                    continue
                pairs.append((str(record['id']), record.get('label')))
    labels = {}
    for doc_id, label in pairs:
        try:
            labels[doc_id] = Sentiment(str(label).lower())
        except ValueError as exc:
            raise DataError(f"{path}: document {doc_id} has label {label!r}", ids=[doc_id]) from exc
    return labels


def manifest_path(out_dir, command):
    return Path(out_dir) / f"{command}{MANIFEST_SUFFIX}"


def build_manifest(command, config, config_digest, seeds, inputs, outputs):
    return {
        'command': command,
        'config_digest': config_digest,
        'config': config,
        'seeds': seeds,
        'inputs': digests(inputs),
        'outputs': digests(outputs),
    }


def write_manifest(manifest, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')
    return path


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ArtifactFormatError(f"{path} is not a manifest: {exc.msg}") from exc
    if not isinstance(manifest, dict) or not {'command', 'inputs', 'outputs'} <= set(manifest):
        raise ArtifactFormatError(f"{path} is not a manifest", producer=detect_producer(path))
    return manifest


def verify_manifest(manifest):
    """List of ``(path, problem)`` for every recorded file that drifted."""
    problems = []
    for section in ('inputs', 'outputs'):
        for name, expected in sorted(manifest.get(section, {}).items()):
            if not Path(name).is_file():
                problems.append((name, 'missing'))
            elif file_digest(name) != expected:
                problems.append((name, 'digest changed'))
    return problems
