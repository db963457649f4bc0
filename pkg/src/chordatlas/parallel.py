"""Thread-pool fan-out for independent solver calls.

Shooting problems, limit refinements and stretching runs are independent and share
only immutable SystemDescriptors, so they are mapped over a
ThreadPoolExecutor. Expected solver failures are returned in place of
results so a single diverging start never cancels its siblings; any other
exception is logged and propagates.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple, Type, TypeVar, Union

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def fan_out(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: Optional[int] = None,
    expected: Tuple[Type[Exception], ...] = (),
) -> List[Union[R, Exception]]:
    """Apply fn to every item concurrently, preserving input order.

    Exceptions of the expected types are caught and returned in the result
    list. Anything else is logged at WARNING and re-raised.
    max_workers = 1 runs serially in the calling thread.
    """
    items = list(items)

    def guarded(item: T) -> Union[R, Exception]:
        try:
            return fn(item)
        except expected as e:
            logger.debug(
                "Fan-out task failed",
                extra={"error_type": type(e).__name__, "error_message": str(e)},
            )
            return e
        except Exception as e:
            logger.warning(
                "Fan-out task raised an unexpected error",
                extra={"error_type": type(e).__name__, "error_message": str(e)},
            )
            raise

    if max_workers == 1 or len(items) <= 1:
        return [guarded(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(guarded, items))
