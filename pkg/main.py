"""Main entry point for the archive-lens toolkit."""

import sys

from dotenv import load_dotenv

load_dotenv()

from archive_lens.cli import main

if __name__ == "__main__":
    sys.exit(main())
