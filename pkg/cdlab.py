"""
Convenience entry point for running the lab without packaging.
"""

from __future__ import annotations

import sys
from pathlib import Path


def main() -> int:
    root = Path(__file__).resolve().parent
    sys.path.insert(0, str(root))

    from src.main import main as app_main
    return app_main()


if __name__ == "__main__":
    sys.exit(main())
