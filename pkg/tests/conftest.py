"""Pytest plumbing: print one PASS/FAIL line per acceptance criterion.

The acceptance tests are named test_cNN_<slug>; after the run we reconcile
pytest's own outcomes into a compact per-criterion table so the acceptance
status is readable at a glance even inside a long -v listing.
"""

import re
import sys

_CRIT_PAT = re.compile(r"test_acceptance\.py::test_c(\d{2})_([a-z0-9_]+)")


def _details():
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    return getattr(mod, "DETAILS", {}) if mod else {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRIT_PAT.search(getattr(rep, "nodeid", ""))
            if m is None:
                continue
            num, slug = int(m.group(1)), m.group(2)
            outcome = "PASS" if status == "passed" else "FAIL"
            if rows.get(num, ("", "PASS"))[1] == "FAIL":
                continue  # a failed phase already recorded; keep the worst
            rows[num] = (slug, outcome)
    if not rows:
        return
    details = _details()
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(rows):
        slug, outcome = rows[num]
        line = "criterion %02d  %-36s %s" % (num, slug.replace("_", " "), outcome)
        if num in details:
            line += "   [%s]" % details[num]
        terminalreporter.write_line(line)
