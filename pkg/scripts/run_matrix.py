"""Run the cross-lingual comparison matrix on a fresh synthetic fixture and print the table.

Rows: monolingual baseline, then M, T, P and all three combined, each trained on
source-derived data alone and again together with the target training set.
"""

import argparse
import json
import tempfile
from pathlib import Path

from emoxling.experiment import run_matrix
from emoxling.synthetic import write_fixture

ROWS = [
    {"label": "mono", "approach": ""},
    {"label": "M", "approach": "M", "features": ["sentence_embed"]},
    {"label": "T", "approach": "T"},
    {"label": "P", "approach": "P"},
    {"label": "M+T+P", "approach": "M,T,P", "features": ["sentence_embed"]},
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/matrix")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--model", choices=("svm", "mlp"), default="svm")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        paths = write_fixture(tmp, seed=args.seed)
        base = json.loads(Path(paths["config"]).read_text())
        base["model"] = args.model
        if args.model == "mlp":
            base["features"] = ["sentence_embed"]
        matrix = {"base": base, "combined": True, "rows": ROWS}
        print(run_matrix(matrix, args.out, Path(paths["config"]).parent))


if __name__ == "__main__":
    main()
