"""Fetch Bank of China (601988.SH) daily bars from Tushare into data/.

Needs the `tushare` package and a token in TUSHARE_TOKEN. The output has the
columns `stockseq` reads (trade_date, open, high, low, close, vol, amount).

    TUSHARE_TOKEN=... python scripts/download_601988.py
"""

import argparse
import os
import sys
from pathlib import Path

import pandas as pd

COLUMNS = ["ts_code", "trade_date", "open", "high", "low", "close", "vol", "amount"]


def fetch(pro, code, start, end):
    # The daily endpoint caps rows per call, so page through by year.
    frames = []
    for year in range(int(start[:4]), int(end[:4]) + 1):
        lo = max(start, f"{year}0101")
        hi = min(end, f"{year}1231")
        frames.append(pro.daily(ts_code=code, start_date=lo, end_date=hi))
    df = pd.concat(frames, ignore_index=True)
    return df[COLUMNS].drop_duplicates("trade_date").sort_values("trade_date")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--code", default="601988.SH")
    ap.add_argument("--start", default="20070101")
    ap.add_argument("--end", default="20220331")
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "601988.SH.csv")
    args = ap.parse_args()

    token = os.environ.get("TUSHARE_TOKEN")
    if not token:
        sys.exit("set TUSHARE_TOKEN to a Tushare Pro token")
    import tushare as ts

    df = fetch(ts.pro_api(token), args.code, args.start, args.end)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(args.out, index=False)
    print(f"wrote {len(df)} rows to {args.out}")


if __name__ == "__main__":
    main()
