"""A short tour of the skew-QBS law: how lambda and q shape the density.

Run:  python3 demos/distribution_tour.py [out_dir]
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from qbsacd.dist import SkewQBS  # noqa: E402


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    y = np.linspace(0.01, 4.0, 800)

    # Xi is the q-quantile, so every curve below has P(Y <= 1) = q.
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    for lam in (-3.0, -1.0, 0.0, 1.0, 3.0):
        d = SkewQBS(0.5, 1.0, lam, 0.5)
        axes[0].plot(y, d.pdf(y), label=f"lambda={lam:g}")
        print(f"lambda={lam:+.0f}  mode={d.mode():.4f}  P(Y<=1)={float(d.cdf(1.0)):.6f}")
    axes[0].set_title("alpha=0.5, median 1")
    axes[0].legend()

    for q in (0.1, 0.5, 0.9):
        d = SkewQBS(0.5, 1.0, -0.5, q)
        axes[1].plot(y, d.pdf(y), label=f"q={q:g}")
    axes[1].axvline(1.0, color="0.5", lw=0.8)
    axes[1].set_title("same Xi=1 read as different quantiles")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(out / "densities.svg")
    print(f"wrote {out / 'densities.svg'}")

    # sampling agrees with the cdf
    d = SkewQBS(0.8, 2.0, 2.0, 0.3)
    draws = d.sample(200_000, np.random.default_rng(1))
    for p in (0.1, 0.3, 0.9):
        print(f"p={p}: quantile {float(d.quantile(p)):.4f}, empirical {np.quantile(draws, p):.4f}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out"))
