from pathlib import Path

from sentiment import artifacts, corpus, labelprop
from sentiment.features import KINDS, build_features
from sentiment.management.base import PipelineCommand, RunRecord, existing_file, sigma_value


class Command(PipelineCommand):
    help = 'Propagate seed labels over a kNN similarity graph onto unlabeled documents'

    def add_arguments(self, parser):
        parser.add_argument('--seeds', type=existing_file, required=True, help='Labeled seed documents JSONL')
        parser.add_argument('--unlabeled', type=existing_file, required=True, help='Unlabeled documents JSONL')
        parser.add_argument('--out-dir', required=True, help='Directory for labels.csv, report.json, graph.csv')
        parser.add_argument('--representation', choices=KINDS, default='tfidf',
                            help='Document features (default: tfidf)')
        parser.add_argument('--k', type=int, help='Neighbours per node (default: 10)')
        parser.add_argument('--sigma', type=sigma_value, help="RBF bandwidth or 'auto' (default: auto, median edge length)")
        parser.add_argument('--eps', type=float, help='Convergence threshold (default: 1e-6)')
        parser.add_argument('--max-iter', type=int, help='Sweep limit (default: 1000)')
        parser.add_argument('--closed-form', action='store_true', help='Solve the fixed point directly')
        parser.add_argument('--class-mass-normalize', action='store_true', default=None,
                            help='Rescale unlabeled class mass to the seed priors')
        parser.add_argument('--write-graph', action='store_true', help='Also write the graph triplets')

    def overrides(self, options):
        return {'GRAPH': {
            'k': options.get('k'),
            'sigma': options.get('sigma'),
            'eps': options.get('eps'),
            'max_iter': options.get('max_iter'),
            'class_mass_normalize': options.get('class_mass_normalize'),
        }}

    def run(self, config, options):
        graph_config = labelprop.GraphConfig.from_mapping(config['GRAPH'])
        seeds = corpus.ingest(options['seeds'], 'jsonl').documents
        unlabeled = corpus.ingest(options['unlabeled'], 'jsonl').documents
        nodes = list(seeds) + list(unlabeled)
        features = build_features(nodes, config, options['representation'])
        node_ids = [d.id for d in nodes]
        workers = max(1, int(config['THREADS']))
        graph = labelprop.build_graph(features.rows(node_ids), graph_config.k, graph_config.sigma, workers)
        start = labelprop.LabelDistribution.from_seeds(
            len(nodes), {i: d.label for i, d in enumerate(seeds)},
        )
        out_dir = Path(options['out_dir'])
        outputs = []
        if options['closed_form']:
            distribution = labelprop.closed_form(graph, start)
        else:
            result = labelprop.propagate(graph, start, graph_config.eps, graph_config.max_iter,
                                         graph_config.class_mass_normalize)
            distribution = result.distribution
            outputs.append(labelprop.write_report(result, out_dir / 'report.json'))
            self.stdout.write(
                f"Propagation {'converged' if result.converged else 'stopped'} after "
                f"{result.iterations} sweeps (delta {result.final_delta:.3g})"
            )
        hard = labelprop.harden(distribution, graph_config.harden_threshold)
        rows = []
        offset = len(seeds)
        for i, doc in enumerate(unlabeled, start=offset):
            rows.append({
                'id': doc.id,
                'party': doc.party.value if doc.party else '',
                'label': hard[i].value,
                'confidence': float(distribution.Y[i].max()),
                'iteration': 1,
            })
        outputs.append(artifacts.write_labels(rows, out_dir / 'labels.csv'))
        if options['write_graph']:
            outputs.append(labelprop.write_graph(graph, out_dir / 'graph.csv', node_ids))
        abstained = sum(1 for row in rows if row['label'] == 'abstain')
        self.stdout.write(self.style.SUCCESS(
            f"Labeled {len(rows) - abstained} documents ({abstained} abstained) into {out_dir / 'labels.csv'}"
        ))
        return RunRecord(out_dir, [options['seeds'], options['unlabeled']], outputs)
