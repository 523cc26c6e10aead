import logging
from pathlib import Path
from types import SimpleNamespace

import pandas as pd

from sentiment import corpus, evalmetrics
from sentiment.exceptions import ArtifactFormatError, DataError
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.models import Party, Sentiment

logger = logging.getLogger(__name__)


def _labeled_rows(path):
    """Objects with ``id``, ``party`` and ``label`` from a labels CSV or labeled JSONL."""
    path = Path(path)
    if path.suffix.lower() != '.csv':
        return list(corpus.ingest(path, 'jsonl').documents)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if not {'id', 'party', 'label'} <= set(frame.columns):
        raise ArtifactFormatError(f"{path} needs id, party and label columns")
    rows = []
    for record in frame.to_dict(orient='records'):
        try:
            party = Party(record['party']) if record['party'] else None
            label = Sentiment(record['label'].lower())
        except ValueError as exc:
            raise DataError(f"{path}: document {record['id']}: {exc}", ids=[record['id']]) from exc
        rows.append(SimpleNamespace(id=record['id'], party=party, label=label))
    return rows


def _count_table(path):
    frame = pd.read_csv(path)
    if not {'party', 'positive', 'negative'} <= set(frame.columns):
        raise ArtifactFormatError(f"{path} needs party, positive and negative columns")
    return evalmetrics.PartySentimentTable.from_counts({
        row['party']: (row['positive'], row['negative']) for row in frame.to_dict(orient='records')
    })


class Command(PipelineCommand):
    help = 'Aggregate labels into the per-party positive/negative sentiment table'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--labels', type=existing_file,
                            help='labels.csv (selflabel) or labeled documents JSONL')
        source.add_argument('--counts', type=existing_file,
                            help='CSV of party,positive,negative counts')
        parser.add_argument('--out', required=True, help='Report JSON')

    def run(self, config, options):
        if options.get('labels'):
            rows = _labeled_rows(options['labels'])
            abstained = [row for row in rows if row.label == Sentiment.ABSTAIN]
            if abstained:
                logger.warning("%d abstained documents left out of the table", len(abstained))
            table = evalmetrics.aggregate_sentiment([row for row in rows if row.label != Sentiment.ABSTAIN])
            source = options['labels']
        else:
            table = _count_table(options['counts'])
            source = options['counts']
        out = evalmetrics.write_json(table.to_dict(), options['out'])
        self.stdout.write(evalmetrics.render_party_table(table))
        return RunRecord(out.parent, [source], [out])
