#!/usr/bin/env python3
"""Run the acceptance suite and print only the per-criterion verdict lines."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"],
        capture_output=True, text=True, cwd=ROOT,
    )
    lines = [ln for ln in proc.stdout.splitlines() if ln.startswith(("[PASS]", "[FAIL]"))]
    print("\n".join(lines))
    print(f"{sum(ln.startswith('[PASS]') for ln in lines)}/{len(lines)} criteria pass")
    sys.exit(proc.returncode)
