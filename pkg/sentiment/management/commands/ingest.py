"""
Read a raw JSONL/CSV corpus, then optionally de-duplicate, filter to
English and tag parties.
"""
from pathlib import Path

from sentiment import corpus, evalmetrics
from sentiment.management.base import PipelineCommand, RunRecord, existing_file
from sentiment.models import Role


class Command(PipelineCommand):
    help = 'Ingest a JSONL or CSV corpus into a normalized documents JSONL file'

    def add_arguments(self, parser):
        parser.add_argument('input', type=existing_file, help='Corpus file (.jsonl or .csv)')
        parser.add_argument(
            '--out',
            required=True,
            help='Documents JSONL to write',
        )
        parser.add_argument(
            '--format',
            choices=corpus.FORMATS,
            help='Input format (default: from the file extension)',
        )
        parser.add_argument(
            '--role',
            choices=[r.value for r in Role if r != Role.SYNTHETIC],
            default=Role.A.value,
            help='Dataset role the documents must satisfy (default: A)',
        )
        parser.add_argument(
            '--rejects',
            help='Rejects report JSONL (default: <out>.rejects.jsonl)',
        )
        parser.add_argument('--dedupe', action='store_true', help='Drop exact duplicate texts')
        parser.add_argument(
            '--language-filter',
            action='store_true',
            help='Keep documents whose function-word ratio reaches the LANGUAGE threshold',
        )
        parser.add_argument('--threshold', type=float, help='Override the language threshold')
        parser.add_argument(
            '--tag-parties',
            action='store_true',
            help='Assign one party per document; multi-party and unmatched documents are excluded',
        )
        parser.add_argument('--lexicon', type=existing_file, help='Party keyword TOML (default: bundled)')
        parser.add_argument('--exclusions', help='Exclusion report JSON written when tagging')

    def overrides(self, options):
        return {'LANGUAGE': {'threshold': options.get('threshold')}}

    def run(self, config, options):
        out = Path(options['out'])
        result = corpus.ingest(options['input'], options.get('format'), Role(options['role']))
        documents = result.documents
        rejects_path = Path(options.get('rejects') or f"{out}.rejects.jsonl")
        outputs = [out, corpus.write_rejects(result.rejects, rejects_path)]

        if options['dedupe']:
            before = len(documents)
            documents = corpus.dedupe(documents)
            self.stdout.write(f"De-duplication removed {before - len(documents)} documents")
        if options['language_filter']:
            documents = corpus.filter_language(documents, config['LANGUAGE']['threshold'])
        if options['tag_parties']:
            lexicon = (corpus.PartyLexicon.from_toml(options['lexicon']) if options.get('lexicon')
                       else corpus.PartyLexicon.bundled())
            tagging = corpus.tag_party(documents, lexicon)
            documents = tagging.documents
            if options.get('exclusions'):
                exclusions = Path(options['exclusions'])
                evalmetrics.write_json(tagging.exclusion_report(), exclusions)
                outputs.append(exclusions)
            self.stdout.write(
                f"Tagged {len(documents)} documents; excluded {len(tagging.multi_party)} multi-party "
                f"and {len(tagging.unmatched)} unmatched"
            )

        corpus.write_documents(documents, out)
        self.stdout.write(self.style.SUCCESS(
            f"Ingested {len(documents)} documents ({len(result.rejects)} rejected) into {out}"
        ))
        inputs = [options['input']] + ([options['lexicon']] if options.get('lexicon') else [])
        return RunRecord(out.parent, inputs, outputs)
