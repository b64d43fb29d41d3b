import logging
import sys

from cliqueopf_utils.opf_commands import OpfCommands
from cliqueopf_utils.user_input_parser import UserInputParser

logger = logging.getLogger("cliqueopf_core")


def _summarize(command: str, result):
    if command == "solve":
        return (f"[ * ] {result.mode}: objective {result.objective:.8g}, converged={result.converged}, "
                f"iterations={result.iteration_count}")
    if command == "gen-radial":
        return f"[ * ] generated {result.n}-bus case"
    return result.to_string(index=False)


def main(argv=None) -> int:
    """ Command-line entry point.

        Returns:
        0 on success, 1 on any error
    """
    parser = UserInputParser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    if args.command is None:
        parser.print_help()
        return 1

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    kwargs = vars(args)
    command = kwargs.pop("command")
    kwargs.pop("verbose")
    try:
        result = OpfCommands()._handler(command, **kwargs)
    except Exception as e:
        logger.error(f"[ ! ] {e}")
        return 1
    print(_summarize(command, result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
