"""
Run the self-labeling schedule: transduction check on the seed set, batch
iterations guarded by the hold-out set, final pass over the rest.

Exit code 3 when the guard rejects a batch; labels of the last accepted
state are still written.
"""
from pathlib import Path

from django.db import DatabaseError

from sentiment import artifacts, corpus, evalmetrics, selflabel
from sentiment.exceptions import GuardHalt
from sentiment.features import KINDS
from sentiment.management.base import PipelineCommand, RunRecord, existing_file, int_list
from sentiment.models import LabelingIteration, Role


class Command(PipelineCommand):
    help = 'Iteratively label the unlabeled pool by label propagation, guarded by a hold-out set'

    def add_arguments(self, parser):
        parser.add_argument('--seeds', type=existing_file, required=True, help='Labeled seed documents JSONL (C)')
        parser.add_argument('--unlabeled', type=existing_file, required=True,
                            help='Party-tagged unlabeled documents JSONL (B)')
        parser.add_argument('--holdout', type=existing_file, required=True, help='Labeled hold-out JSONL (D)')
        parser.add_argument('--out-dir', required=True,
                            help='Directory for audit.jsonl, labels.csv, labeled.jsonl, selflabel.json')
        parser.add_argument(
            '--batch-sizes',
            type=int_list,
            help='Comma-separated batch TOTALS, split equally across parties (default: 1000,10000,20000)',
        )
        parser.add_argument('--no-stratify', action='store_true', help='Draw batches without party strata')
        parser.add_argument('--guard-drop', type=float, help='Largest tolerated hold-out macro-F1 drop (default: 0.02)')
        parser.add_argument('--seed', type=int, help='Random seed (default: 1)')
        parser.add_argument('--soft-seeds', action='store_true', default=None,
                            help='Clamp machine labels to their propagated distributions')
        parser.add_argument('--representation', choices=KINDS, help='Document features (default: tfidf)')
        parser.add_argument('--skip-transduction', action='store_true', help='Skip the seed hold-back check')
        parser.add_argument('--replay', type=existing_file, help='Reuse the schedule recorded in an audit log')
        parser.add_argument('--flip-batch', type=int, help=('Flip every label of this iteration before merging '
                                                            '(guard test hook)'))

    def overrides(self, options):
        return {'SCHEDULE': {
            'batch_sizes': options.get('batch_sizes'),
            'stratify_by_party': False if options.get('no_stratify') else None,
            'guard_drop': options.get('guard_drop'),
            'seed': options.get('seed'),
            'soft_seeds': options.get('soft_seeds'),
            'representation': options.get('representation'),
        }}

    def _record_iteration(self, record):
        run = getattr(self, 'pipeline_run', None)
        if run is None:
            return
        try:
            LabelingIteration.objects.create(
                run=run,
                iteration=record['iteration'],
                batch_size=len(record.get('batch_ids', [])),
                pool_size=record['pool_size'],
                abstain_count=record.get('abstain_count', 0),
                holdout_f1_before=record.get('holdout_f1_before'),
                holdout_f1_after=record.get('holdout_f1_after'),
                accepted=record['accepted'],
                record={k: v for k, v in record.items() if k not in ('batch_ids', 'labeled_ids')},
            )
        except DatabaseError as exc:
            self.stderr.write(self.style.WARNING(f"iteration {record['iteration']} not recorded: {exc}"))

    def _write(self, result, out_dir):
        outputs = [artifacts.write_labels(result.label_rows(), out_dir / 'labels.csv')]
        if len(result.labeled):
            outputs.append(corpus.write_documents(result.labeled, out_dir / 'labeled.jsonl'))
        summary = {
            'halted': result.halted,
            'transduction': result.transduction.report() if result.transduction else None,
            'holdout': result.holdout.report() if result.holdout else None,
            'low_confidence': sum(1 for e in result.entries.values() if e.low_confidence),
        }
        outputs.append(evalmetrics.write_json(summary, out_dir / 'selflabel.json'))
        return outputs

    def run(self, config, options):
        if options.get('replay'):
            schedule = selflabel.Schedule.from_audit(selflabel.AuditLog.read(options['replay']).records)
            config['SCHEDULE'] = dict(config['SCHEDULE'], **schedule.to_dict())
        schedule = selflabel.Schedule.from_mapping(config['SCHEDULE'])
        seeds = corpus.ingest(options['seeds'], 'jsonl', Role.C).documents
        unlabeled = corpus.ingest(options['unlabeled'], 'jsonl').documents
        holdout = corpus.ingest(options['holdout'], 'jsonl', Role.D).documents

        out_dir = Path(options['out_dir'])
        audit_path = out_dir / 'audit.jsonl'
        audit = selflabel.AuditLog(audit_path, listeners=[self._record_iteration])
        hook = selflabel.flip_hook(options['flip_batch']) if options.get('flip_batch') else None
        inputs = [options[k] for k in ('seeds', 'unlabeled', 'holdout', 'replay') if options.get(k)]
        seeds_used = {'schedule': schedule.seed}

        try:
            result = selflabel.run_schedule(
                seeds, unlabeled, holdout, schedule, config,
                corrupt_hook=hook, audit=audit, check_transduction=not options['skip_transduction'],
            )
        except GuardHalt as exc:
            outputs = [audit_path] + self._write(exc.result, out_dir)
            exc.record = RunRecord(out_dir, inputs, outputs, seeds_used)
            raise

        outputs = [audit_path] + self._write(result, out_dir)
        if result.transduction:
            self.stdout.write(f"Transduction check macro-F1: {result.transduction.macro_f1:.4f}")
        self.stdout.write(evalmetrics.render_confusion(result.holdout.confusion))
        self.stdout.write(self.style.SUCCESS(
            f"Labeled {len(result.entries) - len(seeds)} documents; "
            f"hold-out macro-F1 {result.holdout.macro_f1:.4f}"
        ))
        return RunRecord(out_dir, inputs, outputs, seeds_used)
