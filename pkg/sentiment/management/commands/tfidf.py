from pathlib import Path

from sentiment import artifacts, vectorize
from sentiment.management.base import PipelineCommand, RunRecord, existing_file


class Command(PipelineCommand):
    help = 'Weight a processed corpus with TF-IDF and write sparse (doc_id, term_index, weight) triplets'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Processed corpus JSONL (from prep)')
        parser.add_argument('--vocab', type=existing_file, required=True, help='Vocabulary file (from vocab)')
        parser.add_argument('--out', required=True, help='Triplet CSV to write')
        parser.add_argument('--no-normalize', action='store_true', help='Keep raw TF-IDF rows (no L2 norm)')

    def overrides(self, options):
        return {'TFIDF': {'normalize': False if options.get('no_normalize') else None}}

    def run(self, config, options):
        processed = artifacts.read_processed(options['input'])
        vocab = vectorize.read_vocab(options['vocab'])
        doc_matrix = vectorize.tfidf_matrix(processed, vocab, config['TFIDF']['normalize'])
        out = vectorize.write_triplets(doc_matrix, options['out'])
        oov = sum(1 for doc in processed for token in doc.tokens if token not in vocab)
        if oov:
            self.stdout.write(self.style.WARNING(f"{oov} out-of-vocabulary tokens carry no weight"))
        self.stdout.write(self.style.SUCCESS(
            f"TF-IDF matrix {doc_matrix.matrix.shape[0]}x{doc_matrix.matrix.shape[1]} "
            f"({doc_matrix.matrix.nnz} non-zeros) written to {out}"
        ))
        return RunRecord(Path(out).parent, [options['input'], options['vocab']], [out])
