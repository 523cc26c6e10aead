from pathlib import Path

from sentiment import artifacts, vectorize
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Build the term vocabulary (term, document frequency) of a processed corpus'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Processed corpus JSONL (from prep)')
        parser.add_argument('--out', required=True, help='Vocabulary file to write')
        parser.add_argument('--min-df', type=int, help='Minimum document frequency (default: 2)')

    def overrides(self, options):
        return {'VOCAB': {'min_df': options.get('min_df')}}

    def run(self, config, options):
        processed = artifacts.read_processed(options['input'])
        vocab = vectorize.build_vocab(processed, config['VOCAB']['min_df'])
        out = vectorize.write_vocab(vocab, options['out'])
        self.stdout.write(self.style.SUCCESS(f"Vocabulary of {len(vocab)} terms written to {out}"))
        return RunRecord(Path(out).parent, [options['input']], [out])
