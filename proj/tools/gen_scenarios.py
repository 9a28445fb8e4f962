#!/usr/bin/env python3
"""Regenerates scenarios/scenario1.txt and scenarios/scenario2.txt.

The edge lists are reconstructions of two IAB-style meshes (an 11-node mesh
with 2 fiber gateways and an 18-node mesh with 9). Each directed link draws
its success probability from U[0.5, 1.0] and its per-slot capacity from
{1, ..., 5} using a fixed seed, so the checked-in files are reproducible.
"""

import pathlib
import random

SEED = 20190601

SCENARIO1 = dict(
    name="scenario1",
    nodes=11,
    gateways=[0, 1],
    edges=[(0, 2), (0, 3), (2, 4), (3, 4), (3, 5), (4, 6), (5, 6), (5, 7),
           (6, 8), (7, 8), (7, 1), (8, 9), (1, 9), (9, 10), (1, 10)],
    flows=[(0, 1.5), (8, 2.0)],
)

SCENARIO2 = dict(
    name="scenario2",
    nodes=18,
    gateways=list(range(9)),
    edges=[(0, 9), (1, 9), (1, 10), (2, 10), (2, 11), (3, 11), (3, 12), (4, 12),
           (4, 13), (5, 13), (5, 14), (6, 14), (6, 15), (7, 15), (7, 16), (8, 16),
           (8, 17), (0, 17), (9, 10), (11, 12), (13, 14), (15, 16), (12, 13)],
    flows=[(0, 1.5), (12, 2.0)],
)

DEADLINE = 6


def render(spec, rng):
    lines = [
        f"# {spec['name']}: {spec['nodes']} nodes, {len(spec['gateways'])} gateways.",
        "# Reconstructed edge list; P ~ U[0.5, 1.0], T ~ U{1..5} per directed link,",
        f"# drawn by tools/gen_scenarios.py with seed {SEED}.",
        f"nodes {spec['nodes']}",
        "gateways " + " ".join(str(g) for g in spec["gateways"]),
    ]
    for a, b in spec["edges"]:
        for tx, rx in ((a, b), (b, a)):
            cap = rng.randint(1, 5)
            rel = round(rng.uniform(0.5, 1.0), 2)
            lines.append(f"link {tx} {rx} {cap} {rel}")
    for src, rate in spec["flows"]:
        lines.append(f"flow {src} {rate} {DEADLINE}")
    return "\n".join(lines) + "\n"


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "scenarios"
    out.mkdir(exist_ok=True)
    rng = random.Random(SEED)
    for spec in (SCENARIO1, SCENARIO2):
        (out / f"{spec['name']}.txt").write_text(render(spec, rng))


if __name__ == "__main__":
    main()
