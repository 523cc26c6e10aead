from pathlib import Path

from sentiment import corpus
from sentiment.annotate import AnnotationSession, load_hints
from sentiment.conf import resource_path
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Label documents one at a time in the terminal, guided by highlighted lexicon words'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Unlabeled documents JSONL')
        parser.add_argument('--out', required=True, help='Labeled JSONL (appended to; resumes if present)')
        parser.add_argument(
            '--hints',
            type=existing_file,
            help='Word list to highlight, one word per line (default: bundled sentiment hints)',
        )

    def run(self, config, options):
        documents = corpus.ingest(options['input'], 'jsonl').documents
        hints_path = options.get('hints') or resource_path('sentiment_hints.txt')
        session = AnnotationSession(
            documents, options['out'], load_hints(hints_path),
            write=self.stdout.write, mark=self.style.WARNING,
        )
        labeled = session.run()
        self.stdout.write(self.style.SUCCESS(f"Labeled {labeled} documents this session into {options['out']}"))
        out = Path(options['out'])
        return RunRecord(out.parent, [options['input'], hints_path], [out])
