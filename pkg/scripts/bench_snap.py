"""Run the pipeline on the SNAP graphs listed in data/manifests/snap.txt.

The graphs are not shipped. Fetch them into data/snap/ first:

    mkdir -p data/snap && cd data/snap
    curl -O https://snap.stanford.edu/data/facebook_combined.txt.gz
    curl -O https://snap.stanford.edu/data/lastfm_asia.zip && unzip -j lastfm_asia.zip '*edges.csv'
    curl -O https://snap.stanford.edu/data/gemsec_facebook_dataset.tar.gz
    tar xzf gemsec_facebook_dataset.tar.gz --strip-components=2 facebook_clean_data/tvshow_edges.csv
    curl -O https://snap.stanford.edu/data/wikipedia.zip
    unzip -j wikipedia.zip 'wikipedia/chameleon/musae_chameleon_edges.csv'

Set QHDPART_DATA_DIR to use another directory; the acceptance test reads it too.
"""

import argparse
import os
import sys
from pathlib import Path

from qhdpart.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--methods", default="qhd,greedy")
    ap.add_argument("--csv", default="snap_bench.csv")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()

    manifest = ROOT / "data" / "manifests" / "snap.txt"
    data_dir = os.environ.get("QHDPART_DATA_DIR")
    if data_dir:
        # rewrite the manifest against the chosen directory
        lines = []
        for line in manifest.read_text().splitlines():
            if line.strip() and not line.startswith("#"):
                path, k = line.split()
                line = f"{Path(data_dir) / Path(path).name} {k}"
            lines.append(line)
        manifest = Path(args.csv).with_suffix(".manifest.txt")
        manifest.write_text("\n".join(lines) + "\n")
    sys.exit(cli_main(["bench", "--manifest", str(manifest), "--methods", args.methods,
                       "--csv", args.csv, "--parallel", str(args.parallel)]))


if __name__ == "__main__":
    main()
