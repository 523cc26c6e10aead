from pathlib import Path

from sentiment import artifacts, corpus
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.textprep import PrepConfig, run_corpus


class Command(PipelineCommand):
    help = 'Normalize, tokenize, remove stop words and stem a documents JSONL file'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Documents JSONL (from ingest)')
        parser.add_argument('--out', required=True, help='Processed corpus JSONL to write')
        parser.add_argument(
            '--prep-config',
            type=existing_file,
            help='TOML file with a [prep] table (stop words, contractions, compound joins)',
        )
        parser.add_argument('--no-stem', action='store_true', help='Skip suffix stemming')

    def overrides(self, options):
        return {'PREP': {'stem': False if options.get('no_stem') else None}}

    def run(self, config, options):
        if options.get('prep_config'):
            prep = PrepConfig.from_toml(options['prep_config'])
        else:
            prep = PrepConfig.from_mapping(config['PREP'])
        documents = corpus.ingest(options['input'], 'jsonl').documents
        processed = run_corpus(documents, prep, max(1, int(config['THREADS'])))
        out = artifacts.write_processed(processed, options['out'])
        empty = sum(1 for doc in processed if not doc.tokens)
        self.stdout.write(self.style.SUCCESS(
            f"Processed {len(processed)} documents ({empty} empty after preprocessing) into {out}"
        ))
        inputs = [options['input']] + ([options['prep_config']] if options.get('prep_config') else [])
        return RunRecord(Path(out).parent, inputs, [out])
