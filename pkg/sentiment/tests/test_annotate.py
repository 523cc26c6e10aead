import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from sentiment.annotate import AnnotationSession, highlight, labeled_ids
from sentiment.corpus import Document
from sentiment.exceptions import DataError
from sentiment.models import Party

DOCS = [Document(f'd{i}', f'tweet number {i} about corruption', party=Party.DA) for i in range(5)]


def scripted(keys):
    keys = iter(keys)

    def read(prompt):
        try:
            return next(keys)
        except StopIteration:
            raise EOFError
    return read


class AnnotationSessionTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.output = Path(self.tmp.name) / 'seeds.jsonl'
        self.shown = []

    def session(self, keys, documents=DOCS, **kwargs):
        return AnnotationSession(documents, self.output, input_fn=scripted(keys),
                                 write=self.shown.append, interactive=True, **kwargs)

    def records(self):
        return [json.loads(line) for line in self.output.read_text(encoding='utf-8').splitlines()]

    def test_three_labels_then_quit(self):
        self.assertEqual(self.session(['p', 'n', 'p', 'q']).run(), 3)
        records = self.records()
        self.assertEqual([r['id'] for r in records], ['d0', 'd1', 'd2'])
        self.assertEqual([r['label'] for r in records], ['positive', 'negative', 'positive'])
        self.assertEqual({r['provenance'] for r in records}, {'manual'})
        self.assertEqual(records[0]['party'], 'DA')

    def test_skip_and_end_of_input(self):
        self.assertEqual(self.session(['s', 'n']).run(), 1)
        self.assertEqual(labeled_ids(self.output), ['d1'])

    def test_undo_removes_the_last_label(self):
        self.assertEqual(self.session(['p', 'n', 'u', 'p', 'q']).run(), 2)
        self.assertEqual([(r['id'], r['label']) for r in self.records()],
                         [('d0', 'positive'), ('d1', 'positive')])

    def test_undo_with_nothing_labeled(self):
        self.session(['u', 'q']).run()
        self.assertIn('nothing to undo', self.shown)

    def test_unknown_key_repeats_the_document(self):
        self.session(['x', 'n', 'q']).run()
        self.assertIn("unknown key 'x'", self.shown)
        self.assertEqual(labeled_ids(self.output), ['d0'])

    def test_resume_skips_labeled_documents(self):
        self.session(['p', 'p', 'q']).run()
        self.session(['n', 'q']).run()
        self.assertEqual(labeled_ids(self.output), ['d0', 'd1', 'd2'])
        self.assertEqual(self.records()[-1]['label'], 'negative')

    def test_hints_are_marked(self):
        self.session(['q'], hints=frozenset({'corruption'})).run()
        self.assertIn('tweet number 0 about [corruption]', self.shown)

    def test_requires_a_terminal(self):
        session = AnnotationSession(DOCS, self.output, interactive=False)
        with self.assertRaises(DataError):
            session.run()
        self.assertFalse(self.output.exists())


class HighlightTests(SimpleTestCase):
    def test_case_insensitive_whole_words(self):
        self.assertEqual(highlight('Corrupt corruption CORRUPT', {'corrupt'}),
                         '[Corrupt] corruption [CORRUPT]')

    def test_no_hints(self):
        self.assertEqual(highlight('as is', frozenset()), 'as is')
