"""Resumable on-disk cache for the long acceptance QMC runs.

Files are keyed by the run-config digest, the point budget and the kernel
numerics version, so a change to the integrand invalidates them.
"""
import os
from pathlib import Path

from sepvol import estimator, kernels

CACHE = Path(os.environ.get("SEPVOL_TEST_CACHE", Path(__file__).parent / ".qmc-cache"))


def cached_stratum(config, n):
    CACHE.mkdir(parents=True, exist_ok=True)
    path = CACHE / f"{config.digest}-v{kernels.NUMERICS_VERSION}-M{config.points}-n{n}.ckpt"
    acc = None
    if path.exists():
        try:
            acc = estimator.load_checkpoint(str(path))
        except estimator.CheckpointError:
            acc = None
        if acc is not None and acc.M == config.points:
            return acc
    return estimator.run_stratum(config, n, acc=acc, checkpoint_path=str(path))


def cached_run(config):
    return {n: cached_stratum(config, n) for n in config.strata}
