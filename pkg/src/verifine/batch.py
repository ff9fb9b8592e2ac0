"""Run the refiner over many problems with a thread pool.

Worker threads only compute; the main thread is the single writer of
trace files, so concurrent runs never interleave output.  A problem
whose run blows up (rather than failing gracefully inside the loop)
still yields a trace: exhausted, zero iterations, diagnostic attached.
"""

import json
import logging
import os
import re
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from typing import Callable, Dict, List, Optional, Sequence

from .pipeline import (
    NLIProblem,
    RefinementTrace,
    RefinerConfig,
    run_refiner,
    trace_to_dict,
)

log = logging.getLogger(__name__)

ProgressHook = Callable[[RefinementTrace], None]


def _safe_stem(problem_id: str, taken: set) -> str:
    stem = re.sub(r"[^A-Za-z0-9_.-]+", "_", problem_id) or "problem"
    candidate = stem
    suffix = 2
    while candidate in taken:
        candidate = "%s_%d" % (stem, suffix)
        suffix += 1
    taken.add(candidate)
    return candidate


def _failure_trace(problem: NLIProblem, exc: BaseException) -> RefinementTrace:
    return RefinementTrace(
        problem_id=problem.id,
        dataset=problem.dataset,
        iterations=(),
        final_status="exhausted_invalid",
        total_iterations=0,
        diagnostic="pipeline error: %s" % exc,
    )


def run_batch(
    problems: Sequence[NLIProblem],
    cfg: RefinerConfig,
    out_dir: Optional[str] = None,
    workers: int = 1,
    on_result: Optional[ProgressHook] = None,
) -> List[RefinementTrace]:
    """Refine every problem; return traces in input order.

    When `out_dir` is given, each trace is written there as
    trace_<id>.json as soon as its problem finishes.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    stems: Dict[str, str] = {}
    taken: set = set()
    for problem in problems:
        stems[problem.id] = _safe_stem(problem.id, taken)

    results: Dict[str, RefinementTrace] = {}

    def finish(problem: NLIProblem, trace: RefinementTrace) -> None:
        results[problem.id] = trace
        if out_dir is not None:
            path = os.path.join(out_dir, "trace_%s.json" % stems[problem.id])
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(trace_to_dict(trace), fh, ensure_ascii=False, indent=2)
                fh.write("\n")
        if on_result is not None:
            on_result(trace)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = {
            pool.submit(run_refiner, problem, cfg): problem for problem in problems
        }
        while pending:
            done, _ = wait(pending, return_when=FIRST_COMPLETED)
            for future in done:
                problem = pending.pop(future)
                try:
                    trace = future.result()
                except Exception as exc:
                    log.error("problem %s failed: %s", problem.id, exc)
                    trace = _failure_trace(problem, exc)
                finish(problem, trace)
    return [results[p.id] for p in problems]
