"""Planted-partition stand-ins with the node and edge counts of the SNAP graphs.

Useful when the real graphs cannot be downloaded. Reports pipeline Q against
the Q of the planted groups and the wall time.
"""

import argparse
import time

import numpy as np

from qhdpart.generators import planted_partition
from qhdpart.graph import Partition, modularity
from qhdpart.runner import RunSettings, run_method

# name: (nodes, edges, groups, k, share of edges inside groups)
PROXIES = {
    "facebook": (4039, 88234, 16, 16, 0.95),
    "lastfm": (7624, 27806, 20, 24, 0.85),
    "tvshow": (3892, 17262, 24, 24, 0.90),
}


def build(nodes, edges, groups, mix, seed):
    sizes = np.full(groups, nodes // groups)
    sizes[: nodes % groups] += 1
    inside_pairs = float((sizes * (sizes - 1) / 2).sum())
    outside_pairs = nodes * (nodes - 1) / 2 - inside_pairs
    return planted_partition(sizes.tolist(), mix * edges / inside_pairs,
                             (1 - mix) * edges / outside_pairs, seed=seed)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=list(PROXIES))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for name in args.names:
        nodes, edges, groups, k, mix = PROXIES[name]
        g, truth = build(nodes, edges, groups, mix, args.seed)
        t0 = time.perf_counter()
        res = run_method(g, k, RunSettings(method="qhd", seed=args.seed))
        print(f"{name}-like n={g.node_count} m={g.edge_count} k={k} "
              f"Q={res.modularity:.4f} planted={modularity(g, Partition(truth, groups)):.4f} "
              f"time={time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
