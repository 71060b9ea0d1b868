"""Console entry point.

Applies the KAMTORUS_THREADS cap to the numerical backends *before* numpy is
imported, then dispatches to the CLI.  Reductions inside the library use a
fixed sequential order, so the cap affects throughput only, not results.
"""

import os
import sys


def main() -> int:
    threads = os.environ.get("KAMTORUS_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    from .cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
