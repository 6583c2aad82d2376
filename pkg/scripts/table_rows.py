"""Robustness-margin rows for MATPOWER cases, written as CSV."""

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass, field

from imftbounds.powerflow import PfMarginRow, find_case_file, load_case, pf_margin_row


@dataclass
class TableConfig:
    cases: list = field(default_factory=lambda: ["case5", "case9"])
    restrict_u: int = 5
    kxx_mode: str = "abssum"
    slack_voltage: str = "setpoint"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("cases", nargs="*", default=["case5", "case9"])
    ap.add_argument("--restrict-u", type=int, default=5)
    ap.add_argument("--kxx-mode", default="abssum", choices=["abssum", "exact"])
    ap.add_argument("--slack-voltage", default="setpoint", choices=["setpoint", "unity"])
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    a = ap.parse_args(argv)
    cfg = TableConfig(a.cases, a.restrict_u, a.kxx_mode, a.slack_voltage)
    logging.basicConfig(level=logging.ERROR)
    fh = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(PfMarginRow.COLUMNS + ("seconds",))
    for name in cfg.cases:
        t = time.perf_counter()
        row, _, _ = pf_margin_row(load_case(find_case_file(name)), cfg.restrict_u, cfg.kxx_mode, cfg.slack_voltage)
        w.writerow(row.values() + [f"{time.perf_counter() - t:.3f}"])
    if a.out:
        fh.close()


if __name__ == "__main__":
    main()
