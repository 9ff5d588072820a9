"""Runs independent replicate or trial tasks in worker processes.

Results always come back in task order, and each task derives its own random
stream, so the output is the same for any number of workers.
"""
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence

import config

log = config.log


class ReplicatePool:
    def __init__(self, workers: Optional[int] = None):
        self.workers = max(1, workers if workers is not None else config.get_thread_count())

    def map(self, target: Callable, tasks: Sequence) -> List:
        """Applies target to every task

        Args:
            target (Callable): Picklable function of one task
            tasks (Sequence): Task arguments

        Returns:
            List: target(task) for each task, in task order
        """
        tasks = list(tasks)
        workers = min(self.workers, len(tasks))
        if workers <= 1:
            return [target(task) for task in tasks]

        log.debug(f"Running {len(tasks)} tasks on {workers} worker processes")
        chunksize = max(1, len(tasks) // (4 * workers))
        with Pool(processes=workers) as pool:
            return pool.map(target, tasks, chunksize=chunksize)
