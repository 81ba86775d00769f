import logging
import sys

from core.errors import RespireError


def create_cli():
    """Command-line app factory: returns main(argv) -> exit code"""
    from app.commands import COMMANDS
    from app.forms import build_parser
    from config import RunConfig

    parser = build_parser()

    def main(argv=None):
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else 1

        try:
            run = RunConfig.resolve(args)
            logging.basicConfig(
                level=getattr(logging, run.log_level, logging.INFO),
                format='%(asctime)s %(levelname)s %(name)s: %(message)s',
                force=True,
            )
            logging.getLogger(__name__).debug("Run configuration: %s", run.describe())
            return COMMANDS[args.command](run, args)
        except RespireError as e:
            logging.getLogger(__name__).debug("Command failed", exc_info=True)
            print(f"❌ {e}", file=sys.stderr)
            return e.exit_code

    return main
