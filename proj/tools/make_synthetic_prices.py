#!/usr/bin/env python3
"""Write a synthetic weekly soybean price panel for demos and CLI tests.

The internal price follows a random-walk level plus a regression on three
covariate series, and drops by a fixed amount from the intervention date on.
"""

import argparse
import datetime as dt
import random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/synthetic_prices.csv")
    ap.add_argument("--seed", type=int, default=2018)
    ap.add_argument("--effect", type=float, default=-29.0)
    ap.add_argument("--start", default="2016-09-02")
    ap.add_argument("--weeks", type=int, default=156)
    ap.add_argument("--intervention", default="2018-09-01")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    start = dt.date.fromisoformat(args.start)
    cut = dt.date.fromisoformat(args.intervention)

    fob, cbot, rape = 360.0, 350.0, 390.0
    level = 0.0
    rows = []
    for w in range(args.weeks):
        d = start + dt.timedelta(days=7 * w)
        fob += rng.gauss(0.0, 5.0)
        cbot += rng.gauss(0.0, 6.0)
        rape += rng.gauss(0.0, 4.0)
        level += rng.gauss(0.0, 1.0)
        exw = 40.0 + level + 0.6 * fob + 0.2 * cbot + rng.gauss(0.0, 4.0)
        if d >= cut:
            exw += args.effect
        rows.append((d, "soy_exw_ua", exw, "EXW"))
        rows.append((d, "soy_fob_ua", fob, "FOB"))
        rows.append((d - dt.timedelta(days=3), "cbot_soy", cbot, "CBOT"))
        rows.append((d, "rapeseed_exw_ua", rape, "EXW"))

    with open(args.out, "w", newline="") as f:
        f.write("date,series_id,price_usd_per_t,basis\n")
        for d, sid, price, basis in rows:
            f.write(f"{d.isoformat()},{sid},{price:.2f},{basis}\n")


if __name__ == "__main__":
    main()
