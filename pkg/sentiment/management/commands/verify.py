from django.core.management.base import CommandError

from sentiment import artifacts
from sentiment.exceptions import EXIT_DATA, DataError
from sentiment.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Check that the files recorded in run manifests still match their digests'

    def add_arguments(self, parser):
        parser.add_argument('manifests', nargs='+', help='<command>.manifest.json files')

    def handle(self, *args, **options):
        drifted = 0
        for path in options['manifests']:
            try:
                manifest = artifacts.read_manifest(path)
            except DataError as exc:
                raise CommandError(str(exc), returncode=exc.exit_code) from exc
            problems = artifacts.verify_manifest(manifest)
            if not problems:
                self.stdout.write(self.style.SUCCESS(f"{path}: ok ({manifest['command']})"))
                continue
            drifted += 1
            self.stdout.write(self.style.ERROR(f"{path}: {len(problems)} files drifted"))
            for name, problem in problems:
                self.stdout.write(f"  {name}: {problem}")
        if drifted:
            raise CommandError(f"{drifted} manifests no longer match their files", returncode=EXIT_DATA)
