import logging
import sys

from sensing.cli import run_command

logger = logging.getLogger(__name__)


def main():
    try:
        code = run_command(sys.argv[1:])
    except KeyboardInterrupt:
        logger.warning("Interrupted; partial results were not written.")
        code = 130
    except Exception as e:
        logger.exception(f"An error occurred: {e}")
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
