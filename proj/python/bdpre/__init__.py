"""Birth-and-death processes with bounded downward jumps in random environment."""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_command as _run_command


def run(command, config, threads=1, dump_paths=False):
    """Run a CLI command from a config dict.

    Returns (exit_code, report_dict_or_None, error_message, path_dump_csv).
    """
    code, report, error, dump = _run_command(command, json.dumps(config), threads, dump_paths)
    return code, (json.loads(report) if report else None), error, dump


def law(L, atoms):
    """Build an EnvironmentLaw from [(weight, lam, mu), ...]."""
    return EnvironmentLaw(L, [(w, SiteRates(lam, list(mu))) for w, lam, mu in atoms])  # noqa: F405
