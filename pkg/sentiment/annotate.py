"""
Terminal annotation of seed documents.

One document is shown at a time with lexicon hint words highlighted. Each
label is appended to the output JSONL and flushed immediately; restarting
on the same output resumes after the last labeled document.
"""
import json
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from .conf import read_word_list
from .exceptions import DataError
from .models import Provenance, Sentiment

logger = logging.getLogger(__name__)

KEYS = {
    'p': 'positive',
    'n': 'negative',
    's': 'skip',
    'u': 'undo',
    'q': 'quit',
}
PROMPT = '[p]ositive [n]egative [s]kip [u]ndo [q]uit > '

_WORD_RE = re.compile(r"[A-Za-z']+")


def load_hints(path):
    return frozenset(read_word_list(path)) if path else frozenset()


def highlight(text, hints, mark=lambda word: f"[{word}]"):
    if not hints:
        return text
    return _WORD_RE.sub(lambda m: mark(m.group(0)) if m.group(0).lower() in hints else m.group(0), text)


def labeled_ids(path):
    path = Path(path)
    if not path.exists():
        return []
    ids = []
    for line in path.read_text(encoding='utf-8').splitlines():
        if line.strip():
            ids.append(json.loads(line)['id'])
    return ids


class AnnotationSession:
    def __init__(self, documents, output_path, hints=frozenset(), input_fn=input,
                 write=None, mark=None, interactive=None):
        self.documents = list(documents)
        self.output_path = Path(output_path)
        self.hints = hints
        self.input_fn = input_fn
        self.write = write or (lambda text: sys.stdout.write(text + '\n'))
        self.mark = mark or (lambda word: f"[{word}]")
        self.interactive = sys.stdin.isatty() if interactive is None else interactive
        self.labeled = 0

    def _append(self, doc, label):
        record = replace(doc, label=label, provenance=Provenance.MANUAL).to_record()
        with self.output_path.open('a', encoding='utf-8', newline='\n') as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + '\n')
            handle.flush()
            os.fsync(handle.fileno())

    def _drop_last(self):
        lines = [line for line in self.output_path.read_text(encoding='utf-8').splitlines() if line.strip()]
        tmp = self.output_path.with_suffix(self.output_path.suffix + '.tmp')
        tmp.write_text(''.join(line + '\n' for line in lines[:-1]), encoding='utf-8')
        os.replace(tmp, self.output_path)

    def run(self):
        """Returns the number of documents labeled in this session."""
        if not self.interactive:
            raise DataError(
                'annotate needs an interactive terminal; for batch labeling write the '
                'labels into a JSONL corpus file and load it with `ingest`'
            )
        try:
            self.output_path.parent.mkdir(parents=True, exist_ok=True)
            self.output_path.touch(exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot write annotations to {self.output_path}: {exc}") from exc

        done = set(labeled_ids(self.output_path))
        queue = [doc for doc in self.documents if doc.id not in done]
        if done:
            logger.info("resuming: %d already labeled, %d to go", len(done), len(queue))
        history = []
        position = 0
        while position < len(queue):
            doc = queue[position]
            self.write(f"({position + 1}/{len(queue)}) {doc.id}")
            self.write(highlight(doc.text, self.hints, self.mark))
            try:
                key = self.input_fn(PROMPT).strip().lower()[:1]
            except EOFError:
                key = 'q'
            action = KEYS.get(key)
            if action == 'quit':
                break
            if action == 'undo':
                if not history:
                    self.write('nothing to undo')
                    continue
                self._drop_last()
                position = history.pop()
                self.labeled -= 1
                continue
            if action == 'skip':
                position += 1
                continue
            if action in ('positive', 'negative'):
                self._append(doc, Sentiment(action))
                history.append(position)
                self.labeled += 1
                position += 1
                continue
            self.write(f"unknown key {key!r}")
        return self.labeled
