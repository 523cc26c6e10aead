from pathlib import Path

from sentiment import corpus
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Draw disjoint seed (C) and hold-out (D) sets from a labeled documents file'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Labeled documents JSONL')
        parser.add_argument('--out-dir', required=True, help='Directory for seeds.jsonl, holdout.jsonl, rest.jsonl')
        parser.add_argument('--train-size', type=int, required=True, help='Seed set size')
        parser.add_argument('--test-size', type=int, required=True, help='Hold-out set size')
        parser.add_argument('--seed', type=int, default=1, help='Random seed (default: 1)')
        parser.add_argument(
            '--stratify',
            choices=['party', 'label', 'party+label'],
            help='Keep stratum proportions in both samples (default: off)',
        )

    def run(self, config, options):
        documents = corpus.ingest(options['input'], 'jsonl').documents
        seeds, holdout, rest = corpus.split(
            documents, options['seed'], options['train_size'], options['test_size'], options.get('stratify'),
        )
        out_dir = Path(options['out_dir'])
        outputs = [
            corpus.write_documents(seeds, out_dir / 'seeds.jsonl'),
            corpus.write_documents(holdout, out_dir / 'holdout.jsonl'),
            corpus.write_documents(rest, out_dir / 'rest.jsonl'),
        ]
        self.stdout.write(self.style.SUCCESS(
            f"Split {len(documents)} documents: {len(seeds)} seeds, {len(holdout)} hold-out, {len(rest)} rest"
        ))
        return RunRecord(out_dir, [options['input']], outputs, {'split': options['seed']})
