from pathlib import Path

from sentiment import artifacts, topics
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.models import Sentiment


class Command(PipelineCommand):
    help = 'Fit one collapsed-Gibbs LDA model per party on its negative (or chosen) documents'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Labeled processed corpus JSONL (from prep)')
        parser.add_argument('--out', required=True, help='Topic report JSON')
        parser.add_argument('--sentiment', choices=[s.value for s in Sentiment.classes()], default='negative',
                            help='Documents to model (default: negative)')
        parser.add_argument('--topics', dest='K', type=int, help='Topics per party (default: 5)')
        parser.add_argument('--alpha', type=float, help='Document-topic prior (default: 50/K)')
        parser.add_argument('--beta', type=float, help='Topic-word prior (default: 0.01)')
        parser.add_argument('--iters', type=int, help='Gibbs sweeps (default: 1000)')
        parser.add_argument('--seed', type=int, help='Random seed (default: 1)')
        parser.add_argument('--top-k', type=int, help='Words listed per topic (default: 10)')
        parser.add_argument('--svg-dir', help='Also write one SVG bar chart per topic')

    def overrides(self, options):
        return {'LDA': {key: options.get(key) for key in ('K', 'alpha', 'beta', 'iters', 'seed', 'top_k')}}

    def run(self, config, options):
        lda = topics.LdaConfig.from_mapping(config['LDA'])
        processed = artifacts.read_processed(options['input'])
        models = topics.fit_party_topics(processed, lda, Sentiment(options['sentiment']),
                                         max(1, int(config['THREADS'])))
        report = topics.topic_report(models, lda.top_k)
        out = topics.write_topic_report(report, options['out'])
        outputs = [out]
        if options.get('svg_dir'):
            outputs.extend(topics.write_topic_svgs(models, options['svg_dir'], lda.top_k))

        for party, body in report.items():
            self.stdout.write(self.style.SUCCESS(f"{party} ({body['documents']} documents)"))
            for topic in body['topics']:
                words = ', '.join(entry['word'] for entry in topic['words'])
                self.stdout.write(f"  topic {topic['topic']}: {words}")
        return RunRecord(Path(out).parent, [options['input']], outputs, {'lda': lda.seed})
