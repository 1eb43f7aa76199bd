import logging
import queue
import threading
from typing import Any, Callable, List, Optional


LOGGER = logging.getLogger("calprop.workers")
LOGGER.setLevel(logging.INFO)
_FINISH = object()


class IndexedWorker(threading.Thread):
    """
    Each worker pulls task indices from a shared queue and stores the
    result under the same index.
    """

    def __init__(self, index: int, tasks: queue.Queue, function: Callable[[int], Any],
                 results: List[Any], errors: List[BaseException], lock: threading.Lock):
        super().__init__(name=f"calprop-worker-{index}")
        self.daemon = True
        self._index = index
        self._tasks = tasks
        self._function = function
        self._results = results
        self._errors = errors
        self._lock = lock

    @property
    def index(self):
        return self._index

    def run(self) -> None:
        while True:
            task = self._tasks.get()
            if task is _FINISH:
                return
            try:
                self._results[task] = self._function(task)
            except BaseException as e:
                with self._lock:
                    self._errors.append(e)
                LOGGER.exception(f"Worker #{self._index} failed on task {task}")


def launch_indexed(function: Callable[[int], Any], count: int, threads: int = 1) -> List[Any]:
    """
    Runs function(i) for every i in range(count). Returns the results
    ordered by index, whatever the thread that computed them.
    :param function: The task function, taking the task index.
    :param count: The number of tasks.
    :param threads: The number of worker threads. With 1 (or fewer),
      every task runs in the calling thread.
    :return: The list of results.
    """

    if threads <= 1 or count <= 1:
        return [function(index) for index in range(count)]

    tasks = queue.Queue()
    for index in range(count):
        tasks.put(index)
    workers_count = min(threads, count)
    for _ in range(workers_count):
        tasks.put(_FINISH)

    results: List[Optional[Any]] = [None] * count
    errors: List[BaseException] = []
    lock = threading.Lock()
    workers = [IndexedWorker(index, tasks, function, results, errors, lock) for index in range(workers_count)]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()

    if errors:
        raise errors[0]
    return results
