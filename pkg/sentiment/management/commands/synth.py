from pathlib import Path

from sentiment import synthgen
from sentiment.conf import load_toml
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Generate a synthetic two-lexicon corpus with a known ground truth'

    def add_arguments(self, parser):
        parser.add_argument('--out-dir', required=True,
                            help='Directory for seeds.jsonl, unlabeled.jsonl, holdout.jsonl and truth.csv')
        parser.add_argument('--spec', type=existing_file,
                            help='TOML file with generator settings (a [synth] table or top-level keys)')
        parser.add_argument('--n-docs', type=int, help='Documents with a seed or hidden label (default: 2000)')
        parser.add_argument('--rate', dest='sentiment_word_rate', type=float,
                            help='Share of tokens drawn from the sentiment lexicon (default: 0.6)')
        parser.add_argument('--label-fraction', type=float, help='Share of visible seed labels (default: 0.05)')
        parser.add_argument('--positive-share', type=float, help='Share of positive documents (default: 0.5)')
        parser.add_argument('--holdout-size', type=int, help='Separate hold-out documents (default: 200)')
        parser.add_argument('--seed', type=int, help='Random seed (default: 1)')

    def run(self, config, options):
        values = {}
        if options.get('spec'):
            data = load_toml(options['spec'])
            values.update(data.get('synth', data))
        for key in ('n_docs', 'sentiment_word_rate', 'label_fraction', 'positive_share', 'holdout_size', 'seed'):
            if options.get(key) is not None:
                values[key] = options[key]
        spec = synthgen.GenSpec.from_mapping(values)
        generated = synthgen.generate(spec)
        paths = synthgen.write_corpus(generated, options['out_dir'])
        self.stdout.write(self.style.SUCCESS(
            f"{spec.n_docs} documents ({int(generated.visible.sum())} seeds), "
            f"{spec.holdout_size} hold-out, written to {options['out_dir']}"
        ))
        inputs = [options['spec']] if options.get('spec') else []
        return RunRecord(Path(options['out_dir']), inputs, list(paths.values()), {'synth': spec.seed})
