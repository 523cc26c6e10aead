"""
Supervised SVM baseline with stratified cross-validation.

``--compare`` fits every representation and reports the SVM next to label
propagation: cross-validated mean macro-F1 on the seed set and per-class
precision/recall/F1 on the hold-out set.
"""
from pathlib import Path

from sentiment import baseline, corpus, evalmetrics, selflabel
from sentiment.features import KINDS, build_features
from sentiment.labelprop import GraphConfig
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Train and cross-validate the linear SVM baseline'

    def add_arguments(self, parser):
        parser.add_argument('--train', type=existing_file, required=True, help='Labeled seed documents JSONL')
        parser.add_argument('--test', type=existing_file, help='Labeled hold-out documents JSONL')
        parser.add_argument(
            '--unlabeled',
            type=existing_file,
            help='Extra unlabeled documents used only to fit the representation',
        )
        parser.add_argument('--out-dir', required=True, help='Directory for model.json, cv.json, evaluation.json')
        parser.add_argument('--representation', choices=KINDS, default='tfidf',
                            help='Document features (default: tfidf)')
        parser.add_argument('--lambda', dest='reg_lambda', type=float, help='Regularisation (default: 1e-4)')
        parser.add_argument('--epochs', type=int, help='SGD epochs (default: 50)')
        parser.add_argument('--folds', type=int, help='Cross-validation folds (default: 5)')
        parser.add_argument('--seed', type=int, help='Random seed (default: 1)')
        parser.add_argument('--tune', action='store_true', help='Choose lambda from the lambda_grid setting by CV')
        parser.add_argument('--compare', action='store_true',
                            help='SVM vs label propagation for every representation')

    def overrides(self, options):
        return {'BASELINE': {
            'reg_lambda': options.get('reg_lambda'),
            'epochs': options.get('epochs'),
            'folds': options.get('folds'),
            'seed': options.get('seed'),
        }}

    def _load(self, options):
        train = corpus.ingest(options['train'], 'jsonl').documents
        test = corpus.ingest(options['test'], 'jsonl').documents if options.get('test') else None
        extra = corpus.ingest(options['unlabeled'], 'jsonl').documents if options.get('unlabeled') else None
        return train, test, extra

    def _evaluate_svm(self, model, features, docs):
        predicted = baseline.predict(model, features.rows(docs.ids()))
        return evalmetrics.evaluation_report(evalmetrics.confusion(predicted, [d.label for d in docs]))

    def run(self, config, options):
        section = config['BASELINE']
        train, test, extra = self._load(options)
        out_dir = Path(options['out_dir'])
        everything = list(train) + list(test or []) + list(extra or [])
        workers = max(1, int(config['THREADS']))
        labels = [d.label for d in train]
        outputs = []

        if options['compare']:
            return self._compare(config, train, test, everything, out_dir, options)

        features = build_features(everything, config, options['representation'])
        X = features.rows(train.ids())
        reg_lambda = section['reg_lambda']
        if options['tune']:
            reg_lambda, results = baseline.tune(
                X, labels, section['lambda_grid'], section['folds'], section['seed'], section['epochs'], workers,
            )
            outputs.append(evalmetrics.write_json(
                {str(lam): cv.to_dict() for lam, cv in results.items()}, out_dir / 'tuning.json',
            ))
            self.stdout.write(f"Selected lambda={reg_lambda:g}")
        train_config = baseline.TrainConfig(reg_lambda, section['epochs'], section['seed'])
        cv = baseline.cross_validate(X, labels, section['folds'], section['seed'], train_config, workers)
        outputs.append(evalmetrics.write_json(cv.to_dict(), out_dir / 'cv.json'))
        self.stdout.write(f"CV macro-F1: {cv.mean:.4f} +/- {cv.std:.4f} over {section['folds']} folds")

        model = baseline.train_svm(X, labels, train_config)
        outputs.append(baseline.save_model(model, out_dir / 'model.json'))
        if test is not None:
            report = self._evaluate_svm(model, features, test)
            outputs.append(evalmetrics.write_json(report, out_dir / 'evaluation.json'))
            self.stdout.write(evalmetrics.render_polarity_table({'SVM': report}))
        self.stdout.write(self.style.SUCCESS(f"Baseline written to {out_dir}"))
        inputs = [options[k] for k in ('train', 'test', 'unlabeled') if options.get(k)]
        return RunRecord(out_dir, inputs, outputs, {'baseline': section['seed']})

    def _compare(self, config, train, test, everything, out_dir, options):
        section = config['BASELINE']
        graph_config = GraphConfig.from_mapping(config['GRAPH'])
        workers = max(1, int(config['THREADS']))
        train_config = baseline.TrainConfig(section['reg_lambda'], section['epochs'], section['seed'])
        labels = [d.label for d in train]
        cv_rows, holdout_reports = {}, {}
        for kind in KINDS:
            features = build_features(everything, config, kind)
            X = features.rows(train.ids())
            svm_cv = baseline.cross_validate(X, labels, section['folds'], section['seed'], train_config, workers)
            ssl_cv = selflabel.cross_validate_propagation(
                features, train, section['folds'], section['seed'], graph_config, workers,
            )
            cv_rows[kind] = {'svm': svm_cv.to_dict(), 'propagation': ssl_cv.to_dict()}
            self.stdout.write(f"{kind}: CV macro-F1 SVM {svm_cv.mean:.4f}, propagation {ssl_cv.mean:.4f}")
            if test is not None:
                model = baseline.train_svm(X, labels, train_config)
                holdout_reports[f"SVM ({kind})"] = self._evaluate_svm(model, features, test)
                result = selflabel.transduction_eval(
                    features, {d.id: d.label for d in train}, {d.id: d.label for d in test},
                    graph_config, workers,
                )
                holdout_reports[f"Propagation ({kind})"] = result.report()
        outputs = [evalmetrics.write_json(
            {'cross_validation': cv_rows, 'holdout': holdout_reports}, out_dir / 'comparison.json',
        )]
        if holdout_reports:
            self.stdout.write(evalmetrics.render_polarity_table(holdout_reports))
        inputs = [options[k] for k in ('train', 'test', 'unlabeled') if options.get(k)]
        return RunRecord(out_dir, inputs, outputs, {'baseline': section['seed']})
