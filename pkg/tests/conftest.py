import numpy as np
import pytest


@pytest.fixture
def write_dataset_csv(tmp_path):
    """Write a feature matrix + labels to a CSV file and return the path."""

    def _write(features, labels, name="toy.csv", label_column="target",
               positive="1", delimiter=","):
        features = np.atleast_2d(np.asarray(features))
        path = tmp_path / name
        header = [f"x{i}" for i in range(features.shape[1])] + [label_column]
        lines = [delimiter.join(header)]
        for row, label in zip(features, labels):
            cells = [repr(float(v)) for v in row] + [str(label)]
            lines.append(delimiter.join(cells))
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return _write


def random_imbalanced(rng, n_neg=60, n_pos=12, f=5, spread=0.1):
    """Two Gaussian blobs inside the unit box, majority labeled 0."""
    neg = np.clip(rng.normal(0.3, spread, size=(n_neg, f)), 0, 1)
    pos = np.clip(rng.normal(0.7, spread, size=(n_pos, f)), 0, 1)
    features = np.vstack([neg, pos])
    labels = np.array([0] * n_neg + [1] * n_pos)
    return features, labels
