import logging

from django.core.management.base import BaseCommand, CommandError

# Project
from hardy.runner import SUBCOMMANDS, run

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run an anisotropic Hardy space experiment and write its report tree"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
        parser.add_argument(
            "-c",
            "--config",
            action="store",
            dest="config",
            default=None,
            help="JSON experiment configuration, defaults to ANISO_DEFAULT_CONFIG",
            type=str,
        )
        parser.add_argument("--seed", action="store", dest="seed", default=None, help="Root seed (u64)", type=int)
        parser.add_argument(
            "--out", action="store", dest="out", default=None, help="Output directory root", type=str
        )
        parser.add_argument(
            "--threads", action="store", dest="threads", default=None, help="Worker threads", type=int
        )
        parser.add_argument(
            "--count", action="store", dest="count", default=None, help="Number of atoms per run", type=int
        )
        parser.add_argument(
            "--i0-range",
            action="store",
            dest="i0_range",
            default=None,
            nargs=2,
            metavar=("LO", "HI"),
            help="Inclusive range of atom ball indices",
            type=int,
        )
        parser.add_argument(
            "--override",
            action="append",
            dest="overrides",
            default=[],
            help="KEY=VALUE with a dotted key, value read as JSON when possible; repeatable",
        )

    def handle(self, *args, **options):
        flags = {key: options[key] for key in ("seed", "out", "threads", "count", "i0_range", "overrides")}
        code = run(options["subcommand"], options["config"], flags, echo=self.stdout.write)
        if code != 0:
            raise CommandError(f"Experiment {options['subcommand']} finished with exit code {code}", returncode=code)
