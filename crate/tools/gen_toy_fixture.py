"""Regenerates crates/core/data/toy_leaves_v1.tsv.

Each concept is a rectangle in the unit square. Leaves are the cells of the
rectangle arrangement, weighted by area.
"""
from fractions import Fraction as F
from collections import OrderedDict

RECTS = OrderedDict([
    ("animal", ("0", "0.5", "0", "1")),
    ("plant", ("0.5", "0.7", "0", "1")),
    ("rock", ("0.7", "1", "0", "1")),
    ("herbivore", ("0", "0.2", "0", "1")),
    ("omnivore", ("0.2", "0.35", "0", "1")),
    ("carnivore", ("0.35", "0.5", "0", "1")),
    ("brown", ("0", "0.5", "0", "0.4")),
    ("white", ("0", "0.5", "0.4", "0.6")),
    ("deer", ("0", "0.12", "0", "0.4")),
    ("rabbit", ("0.12", "0.2", "0", "0.6")),
    ("grizzly_bear", ("0.2", "0.3", "0", "0.4")),
    ("pig", ("0.2", "0.35", "0.4", "0.6")),
    ("wolf", ("0.35", "0.5", "0", "0.4")),
    ("polar_bear", ("0.35", "0.5", "0.4", "0.6")),
    ("snake", ("0.35", "0.5", "0.6", "1")),
    ("cactus", ("0.5", "0.7", "0.6", "0.8")),
    ("tree", ("0.5", "0.7", "0.8", "1")),
    ("green", ("0.35", "0.7", "0.6", "1")),
    ("american", ("0.25", "0.7", "0.2", "0.8")),
])

rects = {k: tuple(F(v) for v in r) for k, r in RECTS.items()}
xs = sorted({r[0] for r in rects.values()} | {r[1] for r in rects.values()})
ys = sorted({r[2] for r in rects.values()} | {r[3] for r in rects.values()})
cells = OrderedDict()
for x0, x1 in zip(xs, xs[1:]):
    for y0, y1 in zip(ys, ys[1:]):
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        members = tuple(k for k, (a, b, c, d) in rects.items() if a < cx < b and c < cy < d)
        cells[members] = cells.get(members, 0) + (x1 - x0) * (y1 - y0)
assert sum(cells.values()) == 1
assert all(cells.keys())

lines = ["# Toy ontology: one leaf per line, weight<TAB>concepts that hold there.",
         "concepts\t" + ",".join(RECTS)]
for members, w in sorted(cells.items(), key=lambda kv: kv[0]):
    lines.append(f"{float(w)!r}\t{','.join(members)}")
open("crates/core/data/toy_leaves_v1.tsv", "w").write("\n".join(lines) + "\n")
