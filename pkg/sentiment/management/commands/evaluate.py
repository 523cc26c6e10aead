from pathlib import Path

from sentiment import artifacts, evalmetrics
from sentiment.exceptions import DataError
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Score predicted labels against true labels (confusion matrix, P/R/F1, accuracy)'

    def add_arguments(self, parser):
        parser.add_argument('--predictions', type=existing_file, required=True,
                            help='labels.csv (selflabel/propagate) or labeled documents JSONL')
        parser.add_argument('--truth', type=existing_file, required=True,
                            help='truth.csv (synth) or labeled documents JSONL')
        parser.add_argument('--report', help='Evaluation JSON (default: evaluation.json next to predictions)')
        parser.add_argument('--include-seeds', action='store_true',
                            help='Also score manually labeled seed rows (iteration 0)')

    def run(self, config, options):
        predicted = artifacts.read_label_map(options['predictions'], drop_seed_rows=not options['include_seeds'])
        truth = artifacts.read_label_map(options['truth'])
        missing = [doc_id for doc_id in predicted if doc_id not in truth]
        if missing:
            raise DataError(f"{len(missing)} predicted documents have no true label", ids=missing)
        if not predicted:
            raise DataError('no predictions to evaluate')
        ids = list(predicted)
        cm = evalmetrics.confusion([predicted[i] for i in ids], [truth[i] for i in ids])
        report = evalmetrics.evaluation_report(cm)
        out = Path(options.get('report') or Path(options['predictions']).parent / 'evaluation.json')
        evalmetrics.write_json(report, out)

        self.stdout.write(evalmetrics.render_confusion(cm))
        self.stdout.write(evalmetrics.render_polarity_table({'Predictions': report}))
        if cm.abstained:
            self.stdout.write(self.style.WARNING(f"{cm.abstained} abstained predictions were not scored"))
        self.stdout.write(self.style.SUCCESS(
            f"Accuracy {report['accuracy']:.4f}, macro-F1 {report['macro_f1']:.4f}"
        ))
        return RunRecord(out.parent, [options['predictions'], options['truth']], [out])
