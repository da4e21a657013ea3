#!/usr/bin/env python3
"""Convert a Hopkins-155 style download into the directory layout read by `nls bench`.

Input: one directory per sequence holding `<name>_truth.mat` with
  x  3 x P x F homogeneous image coordinates
  s  P ground-truth labels (1-based)

Output, per sequence:
  OUT/<name>/tracks.txt   frames=F points=P, then x1,y1,...,xF,yF per point
  OUT/<name>/truth.txt    one 0-based label per line
  OUT/<name>/group.txt    checker | traffic | articulated
"""

import argparse
import csv
import re
import sys
from pathlib import Path

import numpy as np
from scipy.io import loadmat

GROUPS = ("checker", "traffic", "articulated")


def guess_group(name):
    """Fallback when no --group-map entry exists; override for exact tables."""
    if re.match(r"^\d+R\d*", name) or name.startswith(("1R", "2R", "2T", "3R", "3T")):
        return "checker"
    if name.startswith(("cars", "truck", "kanatani")):
        return "traffic"
    return "articulated"


def load_group_map(path):
    if path is None:
        return {}
    with open(path, newline="") as f:
        out = {}
        for row in csv.reader(f):
            if not row or row[0].startswith("#"):
                continue
            name, group = row[0].strip(), row[1].strip()
            if group not in GROUPS:
                sys.exit(f"{path}: unknown group '{group}' for {name}")
            out[name] = group
        return out


def convert(mat_path, out_dir, group):
    data = loadmat(mat_path)
    x = np.asarray(data["x"], dtype=float)
    labels = np.asarray(data["s"]).ravel().astype(int)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ValueError(f"{mat_path}: expected x of shape 3 x P x F, got {x.shape}")
    _, points, frames = x.shape
    if labels.size != points:
        raise ValueError(f"{mat_path}: {labels.size} labels for {points} points")

    img = x[:2] / x[2:3]
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "tracks.txt", "w") as f:
        f.write(f"frames={frames} points={points}\n")
        for p in range(points):
            row = img[:, p, :].T.ravel()  # x1, y1, x2, y2, ...
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(out_dir / "truth.txt", "w") as f:
        f.writelines(f"{v - labels.min()}\n" for v in labels)
    (out_dir / "group.txt").write_text(group + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path, help="directory of sequence directories")
    ap.add_argument("out", type=Path, help="output dataset directory")
    ap.add_argument("--group-map", type=Path, help="CSV of name,group overriding the name-based guess")
    args = ap.parse_args()

    groups = load_group_map(args.group_map)
    mats = sorted(args.source.glob("*/*_truth.mat"))
    if not mats:
        sys.exit(f"no */*_truth.mat files under {args.source}")
    for mat in mats:
        name = mat.parent.name
        group = groups.get(name, guess_group(name))
        convert(mat, args.out / name, group)
        print(f"{name}: {group}")
    print(f"converted {len(mats)} sequences into {args.out}")


if __name__ == "__main__":
    main()
