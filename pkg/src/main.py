#!/usr/bin/env python3
"""
filecache - Decentralized Coded Caching Simulator Entry Point
"""
import sys
from pathlib import Path

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

from cli.commands import main


if __name__ == "__main__":
    sys.exit(main())
