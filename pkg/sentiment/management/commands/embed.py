from pathlib import Path

from sentiment import artifacts, embed
from sentiment.exceptions import DataError
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.models import EmbedMode


class Command(PipelineCommand):
    help = 'Train skip-gram or CBOW word embeddings with negative sampling'

    def add_arguments(self, parser):
        parser.add_argument('input', nargs='?', type=existing_file, help='Processed corpus JSONL (from prep)')
        parser.add_argument('--out', help='Binary model file to write')
        parser.add_argument('--mode', choices=[m.value for m in EmbedMode], help='sg or cbow (default: sg)')
        parser.add_argument('--dim', type=int, help='Vector dimension (default: 100)')
        parser.add_argument('--window', type=int, help='Context window radius (default: 5)')
        parser.add_argument('--negatives', type=int, help='Noise words per example (default: 5)')
        parser.add_argument('--epochs', type=int, help='Passes over the corpus (default: 5)')
        parser.add_argument('--min-count', type=int, help='Minimum term frequency (default: 5)')
        parser.add_argument('--seed', type=int, help='Random seed (default: 1)')
        parser.add_argument('--shrink-window', action='store_true', default=None,
                            help='Sample the effective window per position')
        parser.add_argument('--subsample', type=float, help='Frequent-word subsampling threshold (default: 0, off)')
        parser.add_argument('--text-out', help='Also export "word f1 ... fdim" text vectors')
        parser.add_argument(
            '--model',
            type=existing_file,
            help='Load an existing model instead of training (for --neighbors)',
        )
        parser.add_argument(
            '--neighbors',
            help='Comma-separated query words; prints the top-k cosine neighbours of each',
        )
        parser.add_argument('--k', type=int, default=10, help='Neighbours per query word (default: 10)')

    def overrides(self, options):
        return {'EMBED': {
            'mode': options.get('mode'),
            'dim': options.get('dim'),
            'window': options.get('window'),
            'negatives': options.get('negatives'),
            'epochs': options.get('epochs'),
            'min_count': options.get('min_count'),
            'seed': options.get('seed'),
            'shrink_window': options.get('shrink_window'),
            'subsample': options.get('subsample'),
        }}

    def run(self, config, options):
        inputs, outputs = [], []
        if options.get('model'):
            model = embed.load_model(options['model'])
            inputs.append(options['model'])
            out_dir = Path(options['model']).parent
        else:
            if not options.get('input') or not options.get('out'):
                raise DataError('training needs an input corpus and --out (or pass --model)')
            processed = artifacts.read_processed(options['input'])
            model = embed.train(processed, embed.EmbedConfig.from_mapping(config['EMBED']))
            outputs.append(embed.save_model(model, options['out']))
            inputs.append(options['input'])
            out_dir = Path(options['out']).parent
            self.stdout.write(self.style.SUCCESS(
                f"{model.config.mode.label} model: {len(model.vocab)} words x {model.config.dim} "
                f"written to {options['out']}"
            ))
        if options.get('text_out'):
            outputs.append(embed.export_text(model, options['text_out']))

        if options.get('neighbors'):
            for word in [w.strip() for w in options['neighbors'].split(',') if w.strip()]:
                if word not in model.vocab:
                    self.stdout.write(self.style.WARNING(f"{word}: not in the vocabulary"))
                    continue
                ranked = embed.nearest(model, word, options['k'])
                listing = ', '.join(f"{term} ({score:.3f})" for term, score in ranked)
                self.stdout.write(f"{word}: {listing}")
        return RunRecord(out_dir, inputs, outputs, {'embed': model.config.seed})
