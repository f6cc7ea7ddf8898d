#!/usr/bin/env python3
"""Build the ARFF fixtures from the UCI Adult files.

Usage: prepare.py adult.data adult.test

Writes, next to this script:
  adult-train-test.arff  train and test rows concatenated, missing values kept as '?'
  adult-iyengar.arff     train rows without missing values, restricted to the
                         8 attributes age, workclass, education, marital-status,
                         occupation, race, sex, native-country
"""
import os
import sys

COLUMNS = [
    ("age", "numeric"),
    ("workclass", None),
    ("fnlwgt", "numeric"),
    ("education", None),
    ("education-num", "numeric"),
    ("marital-status", None),
    ("occupation", None),
    ("relationship", None),
    ("race", None),
    ("sex", None),
    ("capital-gain", "numeric"),
    ("capital-loss", "numeric"),
    ("hours-per-week", "numeric"),
    ("native-country", None),
    ("class", None),
]

IYENGAR = ["age", "workclass", "education", "marital-status", "occupation",
           "race", "sex", "native-country", "class"]


def read_rows(path, skip_first=False):
    rows = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            if skip_first and i == 0:
                continue
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            cells[-1] = cells[-1].rstrip(".")
            assert len(cells) == len(COLUMNS), (path, i, line)
            rows.append(cells)
    return rows


def write_arff(path, relation, names, rows):
    idx = [[c for c, _ in COLUMNS].index(n) for n in names]
    labels = {}
    for j in idx:
        name, kind = COLUMNS[j]
        if kind is None:
            seen = []
            for r in rows:
                v = r[j]
                if v != "?" and v not in seen:
                    seen.append(v)
            labels[j] = sorted(seen)
    with open(path, "w") as out:
        out.write("% Derived from the UCI Adult data set (Kohavi & Becker, 1996).\n")
        out.write(f"@relation {relation}\n\n")
        for j in idx:
            name, kind = COLUMNS[j]
            if kind is None:
                out.write(f"@attribute {name} {{{','.join(labels[j])}}}\n")
            else:
                out.write(f"@attribute {name} numeric\n")
        out.write("\n@data\n")
        for r in rows:
            out.write(",".join(r[j] for j in idx) + "\n")


def main():
    train = read_rows(sys.argv[1])
    test = read_rows(sys.argv[2], skip_first=True)
    here = os.path.dirname(os.path.abspath(__file__))
    names = [c for c, _ in COLUMNS]
    write_arff(os.path.join(here, "adult-train-test.arff"), "adult-train-test", names, train + test)
    complete_train = [r for r in train if "?" not in r]
    write_arff(os.path.join(here, "adult-iyengar.arff"), "adult-iyengar", IYENGAR, complete_train)
    print(len(train), len(test), len(complete_train))


if __name__ == "__main__":
    main()
