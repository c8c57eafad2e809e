"""Molecule fixtures: loading, scaling, splitting.

Fixture files are JSON with a single "molecules" list; each molecule
carries an id, a per-atom feature table (7 columns: atomic number,
chirality, degree, formal charge, radical electrons, hybridization,
scaled mass), an undirected edge list, and a scalar target.

Scaling is fit on the training split only. Features map min-max into
[0, pi] per column (constant columns collapse to 0) and out-of-range
values from the test split are clamped into the interval. Targets map
min-max into [-1, 1] and are deliberately not clamped: a test target
outside the training range should show up in the loss, not be hidden.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_FEATURES = 7

FEATURE_NAMES = (
    "atomic_number",
    "chirality",
    "degree",
    "formal_charge",
    "radical_electrons",
    "hybridization",
    "scaled_mass",
)


@dataclass
class Molecule:
    id: str
    atom_features: np.ndarray
    edges: list[tuple[int, int]]
    target: float

    @property
    def n_atoms(self) -> int:
        return self.atom_features.shape[0]

    def neighbor_lists(self) -> list[list[int]]:
        """Sorted undirected adjacency; an isolated atom lists itself so
        it still aggregates over a non-empty neighborhood."""
        adj: list[set[int]] = [set() for _ in range(self.n_atoms)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return [sorted(nbrs) if nbrs else [v] for v, nbrs in enumerate(adj)]


def _validate_molecule(raw: dict, pos: int) -> Molecule:
    for key in ("id", "atom_features", "edges", "target"):
        if key not in raw:
            label = f"{raw['id']!r}" if "id" in raw else f"#{pos}"
            raise ValueError(f"molecule {label} is missing {key!r}")
    feats = np.asarray(raw["atom_features"], dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != N_FEATURES:
        raise ValueError(
            f"molecule {raw['id']!r}: feature table must be (n_atoms, {N_FEATURES}), "
            f"got {feats.shape}"
        )
    if feats.shape[0] < 1:
        raise ValueError(f"molecule {raw['id']!r} has no atoms")
    if not np.all(np.isfinite(feats)):
        raise ValueError(f"molecule {raw['id']!r} has non-finite features")
    n = feats.shape[0]
    edges = []
    seen = set()
    for edge in raw["edges"]:
        if len(edge) != 2:
            raise ValueError(f"molecule {raw['id']!r}: bad edge {edge}")
        i, j = int(edge[0]), int(edge[1])
        if i == j:
            raise ValueError(f"molecule {raw['id']!r}: self-loop on atom {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"molecule {raw['id']!r}: edge {edge} out of range")
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
    target = float(raw["target"])
    if not np.isfinite(target):
        raise ValueError(f"molecule {raw['id']!r} has non-finite target")
    return Molecule(str(raw["id"]), feats, edges, target)


def load_fixture(path: "str | Path") -> list[Molecule]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"fixture not found: {path}")
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "molecules" not in payload:
        raise ValueError(f"{path} must contain a top-level 'molecules' list")
    molecules = [_validate_molecule(raw, k) for k, raw in enumerate(payload["molecules"])]
    if not molecules:
        raise ValueError(f"{path} contains no molecules")
    ids = [m.id for m in molecules]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path} has duplicate molecule ids")
    return molecules


def split_dataset(
    molecules: list[Molecule], train_fraction: float, seed: int
) -> tuple[list[Molecule], list[Molecule]]:
    """Seeded shuffle split; the train side gets floor(fraction * n)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    n = len(molecules)
    n_train = int(np.floor(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(
            f"split of {n} molecules at {train_fraction} leaves an empty side"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train = [molecules[i] for i in perm[:n_train]]
    test = [molecules[i] for i in perm[n_train:]]
    return train, test


@dataclass
class Scaling:
    """Train-split statistics mapping features to [0, pi], targets to [-1, 1]."""

    feat_lo: np.ndarray
    feat_hi: np.ndarray
    target_lo: float
    target_hi: float

    def scale_features(self, feats: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats, dtype=np.float64)
        span = self.feat_hi - self.feat_lo
        out = np.zeros_like(feats)
        live = span > 0
        out[:, live] = (feats[:, live] - self.feat_lo[live]) / span[live]
        out = np.clip(out, 0.0, 1.0)
        return out * np.pi

    def scale_target(self, target: float) -> float:
        span = self.target_hi - self.target_lo
        if span <= 0:
            return 0.0
        return 2.0 * (float(target) - self.target_lo) / span - 1.0


def fit_scaling(molecules: list[Molecule]) -> Scaling:
    if not molecules:
        raise ValueError("cannot fit scaling on an empty split")
    stacked = np.vstack([m.atom_features for m in molecules])
    targets = np.array([m.target for m in molecules])
    return Scaling(
        feat_lo=stacked.min(axis=0),
        feat_hi=stacked.max(axis=0),
        target_lo=float(targets.min()),
        target_hi=float(targets.max()),
    )


@dataclass
class PreparedMolecule:
    """A molecule with scaling applied, ready for the aggregator."""

    id: str
    features: np.ndarray
    neighbors: list[list[int]]
    target: float

    @property
    def n_atoms(self) -> int:
        return self.features.shape[0]


def prepare(molecules: list[Molecule], scaling: Scaling) -> list[PreparedMolecule]:
    return [
        PreparedMolecule(
            id=m.id,
            features=scaling.scale_features(m.atom_features),
            neighbors=m.neighbor_lists(),
            target=scaling.scale_target(m.target),
        )
        for m in molecules
    ]
