"""Run every bundled scenario through the CLI and print one summary line each."""
import json
import subprocess
import sys
from pathlib import Path

import flatcs

SCENARIOS = Path(flatcs.__file__).parent / "scenarios"

COMMANDS = {
    "abelian_cs.json": ["cs"],
    "bump_degree.json": ["degree", "--oracle"],
    "bump_gauge_change.json": ["verify"],
    "su2_identities.json": ["verify"],
    "su2_identities_4d.json": ["verify"],
    "twisted_flatten.json": ["flatten"],
    "twisted_gauge_change.json": ["verify"],
}

failed = 0
for name, args in COMMANDS.items():
    cmd = [sys.executable, "-m", "flatcs.cli", args[0], "--scenario", str(SCENARIOS / name), *args[1:]]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    report = json.loads(proc.stdout)
    worst = max((r.get("residual") or 0.0) for r in report["records"])
    print(f"{name:28s} {args[0]:8s} exit={proc.returncode} records={len(report['records']):2d} worst residual={worst:.2e}")
    failed += proc.returncode != 0
sys.exit(1 if failed else 0)
