import json

import numpy as np
import pytest


@pytest.fixture
def make_fixture_file(tmp_path):
    """Factory writing a small random molecule fixture, returning its path."""

    def make(n_mols=6, atom_counts=(2, 3), seed=0, name="mols.json"):
        rng = np.random.default_rng(seed)
        mols = []
        for i in range(n_mols):
            n = int(atom_counts[i % len(atom_counts)])
            feats = np.zeros((n, 7))
            feats[:, 0] = rng.choice([6, 7, 8], size=n)
            feats[:, 2] = rng.integers(1, 4, size=n)
            feats[:, 5] = rng.choice([2, 3], size=n)
            feats[:, 6] = feats[:, 0] / 20.0
            edges = [[j, j + 1] for j in range(n - 1)]
            mols.append(
                {
                    "id": f"mol{i}",
                    "atom_features": feats.tolist(),
                    "edges": edges,
                    "target": float(rng.uniform(-2.0, 2.0)),
                }
            )
        path = tmp_path / name
        path.write_text(json.dumps({"molecules": mols}))
        return str(path)

    return make
