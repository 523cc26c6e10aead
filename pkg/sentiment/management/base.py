"""
Shared behaviour of the pipeline management commands.

- ``--config``, ``--threads`` and ``--deterministic`` on every command
- settings < TOML file < flags resolution (see ``sentiment.conf``)
- exit codes: 0 ok, 1 usage, 2 data error, 3 guard halt
- one manifest and one PipelineRun row per invocation
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from sentiment import artifacts
from sentiment.conf import config_digest, pipeline_config
from sentiment.exceptions import EXIT_USAGE, GuardHalt, PipelineError
from sentiment.models import PipelineRun

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """What a command read and wrote; turned into the run manifest."""
    out_dir: Path
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)


def existing_file(value):
    path = Path(value)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"file not found: {value}")
    return path


def sigma_value(value):
    if value == 'auto':
        return value
    try:
        return float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"sigma must be a number or 'auto', got {value!r}") from exc


def int_list(value):
    if not value.strip():
        return []
    try:
        return [int(part) for part in value.split(',') if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from exc


class PipelineCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # Parse errors raise CommandError (exit 1) instead of argparse's exit 2.
        parser.called_from_command_line = False
        parser.add_argument(
            '--config',
            type=existing_file,
            help='TOML file overriding the SENTIMENT_PIPELINE settings',
        )
        parser.add_argument(
            '--threads',
            type=int,
            help='Worker threads (default: SENTIMENT_THREADS or 1)',
        )
        parser.add_argument(
            '--deterministic',
            action=argparse.BooleanOptionalAction,
            default=None,
            help='Force (or with --no-deterministic, lift) single-worker embedding training for reproducible output',
        )
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as exc:
            # Only argument parsing errors get here; execution errors exit inside super().
            self.create_parser(argv[0], argv[1]).print_usage(sys.stderr)
            sys.stderr.write(f"{exc}\n")
            sys.exit(exc.returncode)

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def overrides(self, options):
        """Flag values mapped onto config sections; None means 'not given'."""
        return {}

    def resolve_config(self, options):
        flags = self.overrides(options)
        flags['THREADS'] = options.get('threads')
        flags['DETERMINISTIC'] = options.get('deterministic')
        return pipeline_config(options.get('config'), flags)

    def run(self, config, options):
        """Do the work; return a RunRecord."""
        raise NotImplementedError

    def _start_run(self, digest):
        try:
            return PipelineRun.objects.create(command=self.command_name, config_digest=digest)
        except DatabaseError as exc:
            logger.warning("run not recorded in the database (%s); run `migrate` first", exc)
            return None

    def _finish(self, run, status, exit_code, record=None):
        if run is None:
            return
        try:
            if record is not None:
                run.seeds = record.seeds
                run.input_digests = artifacts.digests(record.inputs)
                run.manifest_path = str(artifacts.manifest_path(record.out_dir, self.command_name))
                run.save(update_fields=['seeds', 'input_digests', 'manifest_path', 'updated_at'])
            run.finish(status, exit_code, artifacts.digests(record.outputs) if record else None)
        except DatabaseError as exc:
            logger.warning("could not update run record: %s", exc)

    def write_manifest(self, record, config, digest):
        manifest = artifacts.build_manifest(
            self.command_name, config, digest, record.seeds, record.inputs, record.outputs,
        )
        return artifacts.write_manifest(manifest, artifacts.manifest_path(record.out_dir, self.command_name))

    def handle(self, *args, **options):
        try:
            config = self.resolve_config(options)
        except ValidationError as exc:
            raise CommandError(f"invalid configuration: {'; '.join(exc.messages)}", returncode=EXIT_USAGE)
        except PipelineError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        digest = config_digest(config)
        self.pipeline_run = self._start_run(digest)
        try:
            record = self.run(config, options)
        except GuardHalt as exc:
            record = getattr(exc, 'record', None)
            if record is not None:
                self.write_manifest(record, config, digest)
            self._finish(self.pipeline_run, PipelineRun.STATUS_HALTED, exc.exit_code, record)
            self.stderr.write(self.style.ERROR(f"Halted: {exc}"))
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except PipelineError as exc:
            self._finish(self.pipeline_run, PipelineRun.STATUS_FAILED, exc.exit_code)
            message = str(exc)
            ids = getattr(exc, 'ids', None)
            if ids:
                shown = ', '.join(str(i) for i in ids[:20])
                message += f"\nids: {shown}" + (f" ... ({len(ids)} total)" if len(ids) > 20 else '')
            raise CommandError(message, returncode=exc.exit_code) from exc
        except ValidationError as exc:
            self._finish(self.pipeline_run, PipelineRun.STATUS_FAILED, EXIT_USAGE)
            raise CommandError('; '.join(exc.messages), returncode=EXIT_USAGE) from exc

        manifest = self.write_manifest(record, config, digest)
        self._finish(self.pipeline_run, PipelineRun.STATUS_OK, 0, record)
        self.stdout.write(self.style.SUCCESS(f"{self.command_name}: manifest written to {manifest}"))
