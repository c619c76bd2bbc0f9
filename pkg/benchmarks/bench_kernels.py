"""Compare the compiled and numpy moment kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--resolution 2] [--repeat 3]

Times batched regular moments, singular (Sauter-Schwab) moments and a full
self-block assembly on an icosphere for each available backend, and checks
that both backends agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from casimir_bem.kernels import backend
from casimir_bem.kernels.panels import (
    DEFAULT_SETTINGS,
    PanelSet,
    self_blocks,
    touching_pairs,
)
from casimir_bem.kernels.rules import sauter_schwab_rule
from casimir_bem.mesh import generate_primitive


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(panels: PanelSet, kappa: float):
    n = len(panels.areas)
    ia, ib = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))
    off = ia != ib              # coincident points would be singular
    ia, ib = ia[off], ib[off]
    pts, w = panels.rule_points(7)
    tp = touching_pairs(panels.mesh)
    edge = tp["edge"]
    ba, bb, ws = sauter_schwab_rule("edge", DEFAULT_SETTINGS.full_order, grade=4.0)
    scale = 4.0 * panels.areas[edge.ta] * panels.areas[edge.tb]
    return {
        f"regular 7x7 ({len(ia)} pairs)": lambda: backend.regular_moments(
            pts, w, panels.centroids, pts, w, panels.centroids, ia, ib, kappa, backend.FULL),
        f"singular edge ({len(edge.ta)} pairs)": lambda: backend.singular_moments(
            edge.corn_a, edge.corn_b, panels.centroids[edge.ta], panels.centroids[edge.tb],
            ba, bb, ws, scale, kappa, backend.FULL),
        "self blocks": lambda: self_blocks(panels, kappa, DEFAULT_SETTINGS),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=2)
    ap.add_argument("--kappa", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    panels = PanelSet(generate_primitive("sphere", (1.0,), args.resolution))
    names = ["python"]
    try:
        backend.use("cython")
        names.append("cython")
    except ImportError:
        print("compiled backend unavailable; timing numpy only")
    timings, results = {}, {}
    for name in names:
        backend.use(name)
        for label, fn in cases(panels, args.kappa).items():
            timings[name, label], results[name, label] = _best(fn, args.repeat)
    labels = list(cases(panels, args.kappa))
    print(f"icosphere resolution {args.resolution}, {len(panels.areas)} triangles, "
          f"kappa {args.kappa}")
    print(f"{'case':34s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for label in labels:
        tp = timings["python", label]
        if "cython" in names:
            tc = timings["cython", label]
            a, b = results["python", label], results["cython", label]
            if hasattr(a, "A"):
                a, b = np.concatenate([a.A, a.Phi, a.C]), np.concatenate([b.A, b.Phi, b.C])
            diff = np.max(np.abs(a - b)) / np.max(np.abs(a))
            print(f"{label:34s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {diff:13.2e}")
        else:
            print(f"{label:34s} {tp:10.4f}")
    backend.use(names[-1])


if __name__ == "__main__":
    main()
