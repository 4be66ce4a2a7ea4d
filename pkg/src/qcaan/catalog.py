"""Registry of the benchmark catalog: the imbalanced-learn collection filtered
to datasets with 16 or more features, plus the Taiwan company-bankruptcy set.

Each entry carries the published shape statistics (feature count, class
counts, negative:positive ratio) and reference distance metadata computed on
min-max scaled features.  The harness validates user-supplied files against
these numbers at ingest and reports any divergence instead of hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass

MIN_FEATURES = 16  # catalog admission predicate


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    n_features: int
    n_samples: int
    n_negative: int
    n_positive: int
    ratio: float  # published at 2 decimals
    dn: tuple  # (min, med, max) pairwise distance within the negative class
    dp: tuple  # within the positive class
    dnp: tuple  # between classes


_ROWS = [
    # name, f, samples, neg, pos, ratio, dn, dp, dnp
    ("arrhythmia", 278, 452, 427, 25, 17.08,
     (0.79, 2.65, 7.10), (0.88, 2.43, 3.60), (1.02, 2.52, 5.70)),
    ("car_eval_34", 21, 1728, 1594, 134, 11.90,
     (1.41, 2.83, 3.46), (1.41, 2.45, 3.46), (1.41, 2.83, 3.46)),
    ("car_eval_4", 21, 1728, 1663, 65, 25.58,
     (1.41, 2.83, 3.46), (1.41, 2.45, 3.16), (1.41, 2.83, 3.46)),
    ("coil_2000", 85, 9822, 9236, 586, 15.76,
     (0.00, 2.06, 4.65), (0.00, 2.09, 3.89), (0.00, 2.12, 4.30)),
    ("isolet", 617, 7797, 7197, 600, 12.00,
     (1.74, 7.79, 13.11), (2.46, 5.84, 11.13), (2.86, 7.27, 12.58)),
    ("libras_move", 90, 360, 336, 24, 14.00,
     (0.00, 2.88, 5.89), (0.71, 2.85, 4.69), (0.73, 3.11, 5.13)),
    ("oil", 49, 937, 896, 41, 21.85,
     (0.13, 1.66, 4.75), (0.24, 1.55, 2.95), (0.17, 1.65, 4.37)),
    ("optical_digits", 64, 5620, 5066, 554, 9.14,
     (0.38, 3.13, 4.94), (0.49, 2.33, 3.99), (0.97, 2.93, 4.54)),
    ("ozone_level", 72, 2536, 2463, 73, 33.74,
     (0.33, 2.15, 5.35), (0.43, 1.38, 3.85), (0.38, 1.99, 5.35)),
    ("protein_homo", 74, 145751, 144455, 1296, 111.46,
     (0.00, 0.78, 4.85), (0.00, 1.01, 4.11), (0.26, 1.08, 5.34)),
    ("satimage", 36, 6435, 5809, 626, 9.28,
     (0.11, 1.45, 3.90), (0.13, 0.65, 2.19), (0.15, 1.16, 3.61)),
    ("scene", 294, 2407, 2230, 177, 12.60,
     (0.00, 4.34, 9.48), (0.00, 4.00, 7.01), (0.00, 4.25, 9.26)),
    ("sick_euthyroid", 42, 3163, 2870, 293, 9.80,
     (0.00, 2.03, 4.95), (0.00, 1.44, 3.49), (0.02, 1.79, 4.93)),
    ("solar_flare_m0", 32, 1389, 1321, 68, 19.43,
     (0.00, 2.83, 4.47), (0.00, 3.16, 4.47), (0.00, 3.16, 4.47)),
    ("spectrometer", 93, 531, 486, 45, 10.80,
     (0.11, 1.20, 6.02), (0.14, 3.21, 6.66), (0.25, 2.17, 7.04)),
    ("thyroid_sick", 52, 3772, 3541, 231, 15.33,
     (0.00, 2.45, 5.14), (0.02, 1.79, 4.09), (0.03, 2.10, 4.96)),
    ("us_crime", 100, 1994, 1844, 150, 12.29,
     (0.49, 2.56, 5.93), (0.84, 2.82, 5.86), (0.71, 3.16, 6.22)),
    ("webpage", 300, 34780, 33799, 981, 34.45,
     (1.00, 4.69, 12.08), (1.00, 4.36, 9.17), (0.00, 4.58, 11.79)),
    ("yeast_ml8", 103, 2417, 2239, 178, 12.58,
     (0.19, 1.84, 2.55), (0.98, 1.81, 2.44), (0.85, 1.83, 2.53)),
    ("bankruptcy", 94, 6819, 6599, 220, 30.00,
     (0.07, 1.39, 3.61), (0.18, 1.42, 3.41), (0.18, 1.44, 3.65)),
]

CATALOG: dict[str, CatalogEntry] = {row[0]: CatalogEntry(*row) for row in _ROWS}


def admits(n_features: int) -> bool:
    return n_features >= MIN_FEATURES


def check_counts(name: str, f: int, n_samples: int, n_neg: int, n_pos: int) -> list[str]:
    """Compare ingested shape statistics against the registry.

    Returns a list of human-readable mismatch descriptions (empty = clean).
    Unknown names are not an error: user-supplied datasets outside the
    catalog are simply not checked.
    """
    entry = CATALOG.get(name)
    if entry is None:
        return []
    problems = []
    for label, got, want in (
        ("features", f, entry.n_features),
        ("samples", n_samples, entry.n_samples),
        ("negatives", n_neg, entry.n_negative),
        ("positives", n_pos, entry.n_positive),
    ):
        if got != want:
            problems.append(f"{name}: {label} = {got}, registry says {want}")
    ratio = n_neg / n_pos if n_pos else float("inf")
    if abs(ratio - entry.ratio) > 0.005 + 1e-12:
        problems.append(f"{name}: ratio = {ratio:.4f}, registry says {entry.ratio:.2f}")
    return problems


def check_distances(name: str, metadata, tolerance: float = 0.01) -> list[str]:
    """Compare computed distance triples against the registry reference values."""
    entry = CATALOG.get(name)
    if entry is None:
        return []
    problems = []
    for key, computed, reference in (("dn", metadata.dn, entry.dn),
                                     ("dp", metadata.dp, entry.dp),
                                     ("dnp", metadata.dnp, entry.dnp)):
        if computed is None:
            problems.append(f"{name}: {key} undefined (single-member class)")
            continue
        for stat, got, want in zip(("min", "med", "max"), computed, reference):
            if abs(got - want) > tolerance + 1e-12:
                problems.append(
                    f"{name}: {stat}({key}) = {got:.4f}, registry says {want:.2f}")
    return problems
