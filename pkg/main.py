"""
Command line entry point: python main.py simulate --config experiment.json
"""

import sys

from main_coordinator import main_cli

if __name__ == "__main__":
    sys.exit(main_cli())
