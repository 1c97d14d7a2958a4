"""Main entry point for the GALA command-line tool."""

import sys

# Set UTF-8 encoding for console output on Windows
if sys.platform == "win32":
    sys.stdout.reconfigure(encoding='utf-8')

from src.gala.cli import main

if __name__ == "__main__":
    sys.exit(main())
