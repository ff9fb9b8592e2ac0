"""Regenerate the transcript caches and problem files under tests/data.

Run from the repository root:

    python3 tests/make_replay_fixtures.py

The script records refiner runs against the scripted transports from
fixtures_e2e, sanity-checks the resulting traces, then replays them from
the freshly written caches to prove the recordings are self-contained.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from verifine.datasets import save_problems
from verifine.llm import TranscriptCache
from verifine.pipeline import RefinerConfig, run_refiner, trace_to_dict
from verifine.prover import GroundOracle

from fixtures_e2e import (
    worked_example_problems,
    worked_example_transport,
    batch_problems,
    batch_transport,
    gateway_config,
    scrub_elapsed,
)

LADY_ROUNDS = 2
BARTENDER_ROUNDS = 2


def _config(mode, cache_path, transport):
    return RefinerConfig(
        llm=gateway_config(),
        backend=GroundOracle(),
        mode=mode,
        cache=TranscriptCache(cache_path),
        transport=transport,
    )


def _record_corpus(label, problems, transport, cache_path):
    if os.path.exists(cache_path):
        os.remove(cache_path)
    cfg = _config("record", cache_path, transport)
    recorded = [run_refiner(problem, cfg) for problem in problems]

    replay_cfg = _config("replay", cache_path, None)
    for problem, first in zip(problems, recorded):
        again = run_refiner(problem, replay_cfg)
        before = scrub_elapsed(trace_to_dict(first))
        after = scrub_elapsed(trace_to_dict(again))
        if before != after:
            raise SystemExit(
                "%s: replay of %s diverges from the recording"
                % (label, problem.id)
            )
    print(
        "%s: recorded %d problems into %s"
        % (label, len(problems), os.path.relpath(cache_path))
    )
    return recorded


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--data-dir",
        default=os.path.join(os.path.dirname(os.path.abspath(__file__)), "data"),
        help="directory that receives the problem files and caches",
    )
    args = parser.parse_args(argv)

    data_dir = args.data_dir
    replay_dir = os.path.join(data_dir, "replay")
    os.makedirs(replay_dir, exist_ok=True)

    pairs = worked_example_problems()
    traces = _record_corpus(
        "worked examples",
        pairs,
        worked_example_transport(),
        os.path.join(replay_dir, "esnli.jsonl"),
    )
    for trace, rounds in zip(traces, (LADY_ROUNDS, BARTENDER_ROUNDS)):
        if trace.final_status != "refined_valid":
            raise SystemExit(
                "%s ended %s: %s"
                % (trace.problem_id, trace.final_status, trace.diagnostic)
            )
        if trace.total_iterations != rounds:
            raise SystemExit(
                "%s took %d rounds, expected %d"
                % (trace.problem_id, trace.total_iterations, rounds)
            )
        print(
            "  %s: %s after %d refinement rounds"
            % (trace.problem_id, trace.final_status, trace.total_iterations)
        )
    save_problems(pairs, os.path.join(data_dir, "esnli_pairs.jsonl"))

    corpus = batch_problems()
    batch_traces = _record_corpus(
        "batch corpus",
        corpus,
        batch_transport(),
        os.path.join(replay_dir, "batch50.jsonl"),
    )
    expected = {0: "valid_initially", 1: "refined_valid"}
    for i, trace in enumerate(batch_traces):
        want = expected[i % 2]
        if trace.final_status != want:
            raise SystemExit(
                "%s ended %s, expected %s (diagnostic: %s)"
                % (trace.problem_id, trace.final_status, want, trace.diagnostic)
            )
    save_problems(corpus, os.path.join(data_dir, "batch50.jsonl"))
    print("batch corpus: all %d verdicts as expected" % len(corpus))


if __name__ == "__main__":
    main()
