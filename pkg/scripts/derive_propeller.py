#!/usr/bin/env python3
"""Derive the seven-copy propeller pair and its transplantation tables.

Enumerates reflection trees in the hub-and-three-blades family over the
reference scalene triangle, discards trees whose copies overlap, groups the
survivors up to congruence, and runs the exhaustive sign-matrix search on
every non-congruent ordered pair.  The pair that admits a transplantation
(for both boundary condition kinds) is frozen into
``drumkit.geometry.PROPELLER_TREE_1/2`` and
``drumkit.transplant.PROPELLER_T_DIRICHLET/NEUMANN``.

Writes a log of the whole enumeration to ``derive_propeller.log`` next to
this script.
"""

import itertools
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from drumkit.errors import LayoutOverlap, TransplantationNotFound
from drumkit.geometry import (
    REFERENCE_TRIANGLE,
    PROPELLER_TREE_1,
    PROPELLER_TREE_2,
    build_layout_from_tree,
    layouts_congruent,
)
from drumkit.transplant import (
    PROPELLER_T_DIRICHLET,
    PROPELLER_T_NEUMANN,
    find_transplantation_matrix,
)

LOG = pathlib.Path(__file__).with_suffix(".log")


def main():
    lines = []

    def say(msg):
        print(msg)
        lines.append(msg)

    # Hub copy 1 with blades through each of its three edges, each blade a
    # chain of two copies; the free choice is which edge of each blade copy
    # carries the tip.  Edge s of the blade copy equal to the gluing edge
    # back to the hub is excluded.
    base = ((2, 1, 0), (3, 1, 1), (4, 1, 2))
    layouts = {}
    for s0 in (1, 2):
        for s1 in (0, 2):
            for s2 in (0, 1):
                tree = base + ((5, 2, s0), (6, 3, s1), (7, 4, s2))
                try:
                    layouts[(s0, s1, s2)] = (tree, build_layout_from_tree(REFERENCE_TRIANGLE, tree))
                except LayoutOverlap:
                    say(f"tips {(s0, s1, s2)}: copies overlap, discarded")
    say(f"non-overlapping trees: {sorted(layouts)}")

    hits = []
    for ka, kb in itertools.permutations(sorted(layouts), 2):
        la, lb = layouts[ka][1], layouts[kb][1]
        if layouts_congruent(la, lb):
            say(f"{ka} -> {kb}: layouts congruent, skipped")
            continue
        t0 = time.time()
        try:
            m = find_transplantation_matrix(la, lb, "dirichlet")
        except TransplantationNotFound:
            say(f"{ka} -> {kb}: no transplantation ({time.time() - t0:.2f}s)")
            continue
        say(f"{ka} -> {kb}: FOUND ({time.time() - t0:.2f}s)")
        say(np.array2string(m.t))
        hits.append((ka, kb, m))

    assert hits, "no propeller pair admits a transplantation"
    ka, kb, m = hits[0]
    tree1 = layouts[ka][0]
    tree2 = layouts[kb][0]
    say(f"frozen pair: tree1={tree1} tree2={tree2}")
    assert tree1 == PROPELLER_TREE_1 and tree2 == PROPELLER_TREE_2, (
        "derived trees disagree with the frozen constants"
    )
    assert np.array_equal(m.t, PROPELLER_T_DIRICHLET), (
        "derived dirichlet table disagrees with the frozen constant"
    )

    l1 = build_layout_from_tree(REFERENCE_TRIANGLE, PROPELLER_TREE_1)
    l2 = build_layout_from_tree(REFERENCE_TRIANGLE, PROPELLER_TREE_2)
    mn = find_transplantation_matrix(l1, l2, "neumann")
    say("neumann table:")
    say(np.array2string(mn.t))
    assert np.array_equal(mn.t, PROPELLER_T_NEUMANN), (
        "derived neumann table disagrees with the frozen constant"
    )
    say("all frozen constants reproduced")
    LOG.write_text("\n".join(lines) + "\n")
    say(f"log written to {LOG}")


if __name__ == "__main__":
    main()
