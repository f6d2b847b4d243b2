"""Resource metrics recorded in the manifest of every command-line run."""
import os
import time

import psutil

# -----------------------------------------------------------------------------


class RunTimer:
    """Wall and process CPU clocks started at construction."""

    def __init__(self):
        self.wall_start = time.time()
        self.cpu_start = time.process_time()
        psutil.cpu_percent(interval=None)

    def metrics(self, output_dir=None):
        return run_metrics(self, output_dir)


def run_metrics(timer=None, output_dir=None):
    """Return walltime, CPU time, and cpu/memory/swap/disk usage percentages.

    Parameters
    ----------
    timer : RunTimer, optional
        When given, times are measured from its start instead of absolute clocks.
    output_dir : str, optional
        Directory whose filesystem usage is reported as "disk".

    Returns
    -------
    dict
    """
    res = {}
    res["walltime"] = time.time() - (timer.wall_start if timer else 0.0)
    res["clocktime"] = time.process_time() - (timer.cpu_start if timer else 0.0)
    res["cpu"] = psutil.cpu_percent(interval=None)
    res["memory"] = psutil.virtual_memory().percent
    res["swap"] = psutil.swap_memory().percent
    res["rss_mb"] = psutil.Process(os.getpid()).memory_info().rss / 2**20
    if output_dir is not None:
        res["disk"] = psutil.disk_usage(output_dir).percent
    return res
