"""
Main module for the SAC stealing-detection laboratory.

This module configures logging, parses the command line and runs the requested
subcommand. Exit codes: 0 on success, 1 when a laboratory error is raised,
2 for usage errors (argparse).
"""

import logging
import sys

from routes import build_parser
from utils import setup_logging
from utils.exceptions import SacException

logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        args.handler(args)
    except SacException as e:
        logger.error("%s failed: %s", args.command, e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
