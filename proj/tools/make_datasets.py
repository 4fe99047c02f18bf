#!/usr/bin/env python3
"""Regenerates the bundled sample datasets under data/.

Both files are deterministic (fixed RNG seeds) so the repository copies can be
reproduced exactly.
"""
import random

TOTAL_ROWS = 999


def wine(path):
    rng = random.Random(20240901)
    header = [
        "fixed_acidity", "volatile_acidity", "citric_acid", "residual_sugar",
        "chlorides", "free_sulfur_dioxide", "total_sulfur_dioxide", "density",
        "ph", "sulphates", "alcohol", "quality",
    ]
    counts = {3: 10, 4: 52, 5: 420, 6: 399, 7: 99, 8: 19}
    assert sum(counts.values()) == TOTAL_ROWS
    qualities = [q for q, n in counts.items() for _ in range(n)]
    rng.shuffle(qualities)
    rows = []
    for q in qualities:
        # center each attribute on a quality-dependent mean so the label is
        # learnable but noisy
        t = (q - 3) / 5.0
        alcohol = rng.gauss(8.8 + 3.2 * t, 0.65)
        volatile = rng.gauss(0.95 - 0.55 * t, 0.14)
        sulphates = rng.gauss(0.48 + 0.35 * t, 0.10)
        citric = rng.gauss(0.10 + 0.40 * t, 0.12)
        fixed = rng.gauss(7.6 + 1.6 * t, 1.3)
        sugar = rng.gauss(2.5, 1.0) + rng.expovariate(1.2)
        chlorides = rng.gauss(0.11 - 0.03 * t, 0.025)
        free_so2 = rng.gauss(16 + 4 * t, 8)
        total_so2 = free_so2 * rng.uniform(1.8, 3.6) + rng.gauss(8, 6)
        density = rng.gauss(0.9978 - 0.0016 * t, 0.0012)
        ph = rng.gauss(3.31, 0.14)
        row = [
            max(4.0, fixed), max(0.1, volatile), min(1.0, max(0.0, citric)),
            max(0.9, sugar), max(0.012, chlorides), max(1.0, free_so2),
            max(6.0, total_so2), density, max(2.7, min(4.1, ph)),
            max(0.3, sulphates), max(8.0, min(15.0, alcohol)), q,
        ]
        rows.append(row)
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(f"{x:.4f}" if isinstance(x, float) else str(x)
                             for x in row) + "\n")


def synthetic(path):
    rng = random.Random(7777)
    with open(path, "w") as f:
        f.write("f0,f1,f2,f3,f4,y\n")
        for _ in range(300):
            xs = [rng.uniform(-1.0, 1.0) for _ in range(5)]
            y = xs[0] * xs[1] + rng.gauss(0.0, 0.05)
            f.write(",".join(f"{v:.6f}" for v in xs + [y]) + "\n")


if __name__ == "__main__":
    import os
    os.makedirs("data", exist_ok=True)
    wine("data/wine_quality_red.csv")
    synthetic("data/synthetic.csv")
    print("wrote data/wine_quality_red.csv and data/synthetic.csv")
