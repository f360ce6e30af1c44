"""Write the demo workspace (fixtures, datasets, vocabularies, judgments).

Usage: python scripts/make_demo.py [TARGET_DIR]   (default: ./demo)
"""

import sys
from pathlib import Path

from ovfact.demodata import write_demo_workspace

if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")
    root = write_demo_workspace(target)
    print(f"demo workspace written to {root}")
