#!/usr/bin/env python3
"""Rebuild data/heart.csv and data/adult.csv from wheels published on PyPI.

The UCI mirrors are not always reachable, but two PyPI packages ship the
original files as package data:

  * Orange3      -> Orange/datasets/heart_disease.tab  (Cleveland, 303 rows)
  * responsibly  -> responsibly/dataset/adult/adult.{data,test}  (48,842 rows)

Usage: python3 scripts/fetch_datasets.py [--out data]
"""

import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def download_wheel(package: str, dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         "--only-binary", ":all:", package, "-d", str(dest)],
        check=True,
    )
    wheels = sorted(dest.glob("*.whl"))
    if not wheels:
        raise SystemExit(f"no wheel downloaded for {package}")
    return wheels[-1]


def write_heart(wheel: pathlib.Path, out: pathlib.Path) -> int:
    text = zipfile.ZipFile(wheel).read("Orange/datasets/heart_disease.tab").decode()
    lines = text.splitlines()
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[3:] if line.strip()]
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c.strip() if c.strip() not in ("", "?") else "?" for c in row])
    return len(rows)


def write_adult(wheel: pathlib.Path, out: pathlib.Path) -> int:
    zf = zipfile.ZipFile(wheel)
    n = 0
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ADULT_COLUMNS)
        for name in ("adult.data", "adult.test"):
            raw = zf.read(f"responsibly/dataset/adult/{name}").decode()
            for row in csv.reader(io.StringIO(raw)):
                if len(row) != len(ADULT_COLUMNS):
                    continue
                row = [c.strip() for c in row]
                row[-1] = row[-1].rstrip(".")
                writer.writerow(row)
                n += 1
    return n


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        orange = download_wheel("Orange3", tmp / "orange")
        print("heart.csv rows:", write_heart(orange, out / "heart.csv"))
        resp = download_wheel("responsibly", tmp / "responsibly")
        print("adult.csv rows:", write_adult(resp, out / "adult.csv"))


if __name__ == "__main__":
    main()
