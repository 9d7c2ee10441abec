"""Regenerate the golden regression records under tests/golden/.

Run from the repository root:  python3 tests/make_goldens.py
"""

import json
import os

from plate_afem import afem

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def square_clamped_trace():
    cfg = afem.AfemConfig(geometry="square", bc="clamped", n=0, cluster_size=1,
                          theta=0.5, max_levels=8, deterministic=True)
    trace = afem.run_afem(cfg)
    ref = afem.reference_eigenvalues("square", "clamped", [1], 20000)
    lam_ref = float(ref.limits[0])
    ratios = [float(r.eta2_total / abs(lam_ref - r.eigenvalues[0]))
              for r in trace.levels]
    return {
        "config": {"geometry": "square", "bc": "clamped", "theta": 0.5,
                   "max_levels": 8, "J": [1]},
        "lambda_ref": lam_ref,
        "lambda_ref_uncertainty": float(ref.uncertainties[0]),
        "ndof": [int(v) for v in trace.ndofs],
        "lambda_1": [float(r.eigenvalues[0]) for r in trace.levels],
        "eta2_total": [float(r.eta2_total) for r in trace.levels],
        "efficiency_ratio": ratios,
    }


def main():
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    path = os.path.join(GOLDEN_DIR, "square_clamped_theta05.json")
    with open(path, "w") as fh:
        json.dump(square_clamped_trace(), fh, indent=2)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
