"""Write a synthetic labeled pool for console end-to-end tests.

Usage: python3 make_pool.py OUT_FILE N SEED
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from synthetic import make_two_cluster_corpus  # noqa: E402

from relsift.ingest import write_records  # noqa: E402

out_file, n, seed = sys.argv[1], int(sys.argv[2]), int(sys.argv[3])
with open(out_file, "w", encoding="utf-8") as fp:
    write_records(make_two_cluster_corpus(n, seed=seed), fp)
print(f"wrote {n} records to {out_file}")
