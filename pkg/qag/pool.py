"""
Fan-out of independent jobs (training trials, sweep points) to worker processes.

Jobs are submitted with ``loop.run_in_executor`` and collected with
``asyncio.gather``, so results always come back in submission order.
"""

import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

from tqdm import tqdm

logger = logging.getLogger(__name__)


async def gather_jobs(
    fn: Callable[[Any], Any],
    jobs: Sequence[Any],
    workers: int = 1,
    progress: bool = False,
    desc: Optional[str] = None,
) -> List[Any]:
    """Run ``fn(job)`` for every job; ``fn`` must be a picklable top-level function."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in tqdm(jobs, desc=desc, disable=not progress)]

    loop = asyncio.get_running_loop()
    bar = tqdm(total=len(jobs), desc=desc, disable=not progress)
    logger.info("Dispatching %d jobs to %d worker processes", len(jobs), workers)

    with ProcessPoolExecutor(max_workers=workers) as executor:

        async def run_one(job):
            result = await loop.run_in_executor(executor, fn, job)
            bar.update(1)
            return result

        try:
            return await asyncio.gather(*(run_one(job) for job in jobs))
        finally:
            bar.close()


def run_jobs(
    fn: Callable[[Any], Any],
    jobs: Sequence[Any],
    workers: int = 1,
    progress: bool = False,
    desc: Optional[str] = None,
) -> List[Any]:
    """Synchronous wrapper around :func:`gather_jobs`."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in tqdm(jobs, desc=desc, disable=not progress)]
    return asyncio.run(gather_jobs(fn, jobs, workers, progress, desc))
