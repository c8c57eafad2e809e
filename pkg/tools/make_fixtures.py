"""Generate the bundled molecule fixtures.

Molecules are random trees with an occasional ring, carrying plausible
atom features. The regression target mixes two signals:

    target(G) = mean over nodes v of ( mean over neighbors u of phi(u) )
              + beta * mean over edges (a, b) of s(a) * s(b)

phi is a fixed smooth score of the atom's element, degree, and
hybridization; s is the element score alone. The first term is exactly
representable by a mean-over-neighbors aggregator; the bond product term
is not, so models must approximate it and capacity/trainability
differences stay visible in the training loss. Isolated atoms average
over themselves, matching the aggregation fallback.
"""

import argparse
import json
from pathlib import Path

import numpy as np

ATOMIC_MASS = {1: 1.008, 6: 12.011, 7: 14.007, 8: 15.999, 9: 18.998}
# Electronegativity-flavored element score in [0, 1].
ELEMENT_SCORE = {1: 0.22, 6: 0.55, 7: 0.70, 8: 0.80, 9: 0.90}

# Per-molecule composition regimes: weights over (H, C, N, O, F). Drawing
# the regime per molecule spreads the targets instead of clustering them
# at the corpus mean.
REGIMES = [
    (0.30, 0.60, 0.04, 0.04, 0.02),  # hydrocarbon
    (0.15, 0.45, 0.05, 0.30, 0.05),  # oxygen-rich
    (0.15, 0.45, 0.30, 0.05, 0.05),  # amine-like
    (0.10, 0.50, 0.05, 0.10, 0.25),  # fluorinated
]
ELEMENTS = (1, 6, 7, 8, 9)


def random_graph(rng, n):
    """Random tree on n nodes, with one extra ring-closing edge sometimes."""
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    if n >= 4 and rng.random() < 0.35:
        existing = {tuple(sorted(e)) for e in edges}
        for _ in range(8):
            a, b = rng.choice(n, size=2, replace=False)
            key = (min(int(a), int(b)), max(int(a), int(b)))
            if key not in existing:
                edges.append(key)
                break
    return edges


def _degrees(n, edges):
    deg = np.zeros(n, dtype=int)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    return deg


def atom_features(rng, n, edges):
    """(n, 7) array: element, chirality, degree, charge, radicals, hybridization, mass."""
    deg = _degrees(n, edges)
    weights = np.array(REGIMES[rng.integers(0, len(REGIMES))])
    feats = np.zeros((n, 7))
    for v in range(n):
        w = weights.copy()
        if deg[v] >= 2:
            w[0] = 0.02  # hydrogen stays on the periphery
        w /= w.sum()
        z = int(rng.choice(ELEMENTS, p=w))
        chirality = 0
        if z == 6 and deg[v] >= 3 and rng.random() < 0.15:
            chirality = int(rng.integers(1, 3))
        charge = 0
        if z in (7, 8) and rng.random() < 0.05:
            charge = int(rng.choice([-1, 1]))
        radicals = 1 if rng.random() < 0.03 else 0
        if z in (1, 9):
            hybridization = 3
        elif z == 6:
            hybridization = 3 if rng.random() < 0.7 else 2
        else:
            hybridization = int(rng.choice([2, 3]))
        feats[v] = [z, chirality, deg[v], charge, radicals, hybridization, ATOMIC_MASS[z] / 20.0]
    return feats


def phi(row):
    """Per-atom score driving the target; smooth in element, degree, hybridization."""
    z = int(row[0])
    return 0.6 * ELEMENT_SCORE[z] + 0.25 * (row[2] / 4.0) + 0.15 * (row[5] - 2.0)


def neighborhood_target(feats, edges, beta):
    n = feats.shape[0]
    nbrs = {v: [] for v in range(n)}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    scores = [phi(feats[v]) for v in range(n)]
    per_node = []
    for v in range(n):
        pool = nbrs[v] if nbrs[v] else [v]
        per_node.append(np.mean([scores[u] for u in pool]))
    value = float(np.mean(per_node))
    if edges and beta:
        bond = np.mean(
            [
                ELEMENT_SCORE[int(feats[a][0])] * ELEMENT_SCORE[int(feats[b][0])]
                for a, b in edges
            ]
        )
        value += beta * float(bond)
    return value


def make_molecule(rng, mol_id, n, beta):
    edges = random_graph(rng, n)
    feats = atom_features(rng, n, edges)
    return {
        "id": mol_id,
        "atom_features": feats.tolist(),
        "edges": [list(e) for e in edges],
        "target": neighborhood_target(feats, edges, beta),
    }


def make_corpus(prefix, n_mols, atom_lo, atom_hi, seed, beta):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(atom_lo, atom_hi + 1, size=n_mols)
    sizes[0] = atom_hi  # the stated maximum must actually occur
    sizes[1] = atom_lo
    return {
        "molecules": [
            make_molecule(rng, f"{prefix}-{i:03d}", int(sizes[i]), beta)
            for i in range(n_mols)
        ]
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="fixtures", help="output directory")
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument(
        "--beta", type=float, default=1.0, help="bond interaction weight"
    )
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpora = {
        "case1.json": make_corpus("c1", 30, 4, 9, args.seed, args.beta),
        "case2.json": make_corpus("c2", 30, 7, 18, args.seed + 1, args.beta),
    }
    for name, corpus in corpora.items():
        path = out / name
        path.write_text(json.dumps(corpus, indent=1))
        targets = [m["target"] for m in corpus["molecules"]]
        sizes = [len(m["atom_features"]) for m in corpus["molecules"]]
        print(
            f"{path}: {len(corpus['molecules'])} molecules, "
            f"atoms {min(sizes)}-{max(sizes)}, "
            f"target range [{min(targets):.3f}, {max(targets):.3f}]"
        )


if __name__ == "__main__":
    main()
