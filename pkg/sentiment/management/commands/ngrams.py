from pathlib import Path

from sentiment import artifacts, topics
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.models import Sentiment


class Command(PipelineCommand):
    help = 'Rank the most frequent n-grams per party'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Processed corpus JSONL (from prep)')
        parser.add_argument('--out', required=True, help='N-gram CSV (party, rank, ngram, count)')
        parser.add_argument('--n', type=int, help='Gram length (default: 4)')
        parser.add_argument('--top', type=int, help='Grams kept per party (default: 20)')
        parser.add_argument('--sentiment', choices=[s.value for s in Sentiment.classes()] + ['all'],
                            default='negative', help='Documents to mine (default: negative)')

    def overrides(self, options):
        return {'NGRAMS': {'n': options.get('n'), 'top': options.get('top')}}

    def run(self, config, options):
        processed = artifacts.read_processed(options['input'])
        sentiment = None if options['sentiment'] == 'all' else Sentiment(options['sentiment'])
        tables = topics.party_ngrams(processed, config['NGRAMS']['n'], config['NGRAMS']['top'],
                                     sentiment, max(1, int(config['THREADS'])))
        out = topics.write_ngram_csv(tables, options['out'])
        for party, table in tables.items():
            self.stdout.write(self.style.SUCCESS(f"{party} ({table.total_windows} windows)"))
            for row in table.rows()[:5]:
                self.stdout.write(f"  {row['rank']:>3}. {row['ngram']} ({row['count']})")
        return RunRecord(Path(out).parent, [options['input']], [out])
