from __future__ import annotations

import json
import sys

from django.core.management.base import BaseCommand, CommandError, CommandParser

from capacitance.conf import solver_setting
from capacitance.constants import EXIT_USAGE, EXIT_VERIFICATION
from capacitance.exceptions import CapacitanceError
from capacitance.experiments import SCENARIOS, RunConfig, record_run, run_scenario


class _UsageParser(CommandParser):
    """Argument errors exit with the usage code instead of argparse's 2."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")
        raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


class Command(BaseCommand):
    help = "Run a capacitance extraction scenario (parallel plate, cube, Maxwell square, custom, verify)."

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = _UsageParser
        return parser

    def add_arguments(self, parser):
        parser.add_argument("--scenario", required=True, choices=SCENARIOS)
        sweep = parser.add_mutually_exclusive_group()
        sweep.add_argument("--n", type=int, help="single mesh density (divisions per panel edge)")
        sweep.add_argument("--n-sweep", help="comma separated, strictly increasing mesh densities")
        parser.add_argument("--tier", default="quad", choices=["point", "double", "quad", "all"])
        parser.add_argument("--width", type=float, default=1.0, help="plate width [m]")
        parser.add_argument("--depth", type=float, default=1.0, help="plate depth [m]")
        parser.add_argument("--gap", type=float, default=0.1, help="plate separation [m]")
        parser.add_argument("--edge", type=float, default=1.0, help="cube / square edge [m]")
        parser.add_argument("--voltage", type=float, default=1.0, help="Maxwell square voltage [V]")
        parser.add_argument("--geometry", help="geometry JSON for the custom scenario")
        parser.add_argument("--out", help="output directory (default: CAPACITANCE['OUTPUT_DIR'])")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--trials", type=int, help="randomized pairs per relation for verify")
        parser.add_argument("--memory-cap-gib", type=float)
        parser.add_argument("--record", action="store_true", help="store the run in the database")

    def handle(self, *args, **options):
        if options["n"] is not None:
            n_values = (options["n"],)
        else:
            n_values = options["n_sweep"]

        try:
            config = RunConfig(
                scenario=options["scenario"],
                n_values=n_values,
                tiers=options["tier"],
                width=options["width"],
                depth=options["depth"],
                gap=options["gap"],
                edge=options["edge"],
                voltage=options["voltage"],
                geometry_path=options["geometry"],
                output_dir=options["out"] or solver_setting("OUTPUT_DIR"),
                seed=options["seed"],
                trials=options["trials"],
                memory_cap_gib=options["memory_cap_gib"],
            )
            outcome = run_scenario(config)
        except CapacitanceError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

        self.stdout.write(json.dumps(outcome.summary, indent=2, sort_keys=True))
        for path in outcome.artifacts:
            self.stdout.write(f"wrote {path}")

        if options["record"]:
            run = record_run(config, outcome)
            self.stdout.write(self.style.SUCCESS(f"Recorded run #{run.pk}"))

        if not outcome.passed:
            failures = outcome.summary.get("failures")
            raise CommandError(f"kernel verification failed ({failures} cases)", returncode=EXIT_VERIFICATION)
