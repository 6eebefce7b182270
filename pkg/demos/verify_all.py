"""Run every numerical check for one parameter pair and summarise.

Each check writes a flat JSON report with its metrics and the bounds they were
held to.  Checks that do not apply to the parameters are reported as skipped
together with the reason.  Output goes to ./verify/.
"""
import sys

from esdl import RunConfig, run_all
from esdl.verify import exit_status

config = RunConfig(p=4, lam=1.0, out_dir="verify")
reports = run_all(config)
for r in reports:
    shown = {k: v for k, v in list(r.metrics.items())[:3]}
    extra = f"  ({r.notes})" if r.status == "SKIPPED" else f"  {shown}"
    print(f"{r.check_id:14s} {r.status:8s} {r.elapsed_s:6.2f} s{extra}")
sys.exit(exit_status(reports))
