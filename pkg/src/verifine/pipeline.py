"""The verify-and-refine loop.

One round is: formalise the problem into a theory, repair blatant syntax
trouble (bounded sub-loop), sketch the argument, construct a linear
proof, and check it.  A failed check yields a feedback bundle (first
error, failed step, axioms that step cited); the explanation is then
filtered to the facts the attempt actually used and rewritten by the
refinement stage.  The initial check plus up to `max_refinement_iterations`
refined re-checks make a trace.

Stage failures never abort a problem: a malformed stage output consumes
the round and the loop moves on with whatever it has.  A backend that
cannot even open a session aborts with a diagnostic on the trace.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .llm import (
    CacheMiss,
    LLMConfig,
    MalformedStageOutput,
    TranscriptCache,
    Transport,
    complete,
    extract_stage_output,
)
from .llmtypes import StageKind
from .logic import (
    ArityConflict,
    Formula,
    LogicError,
    ParseError,
    free_variables,
    has_quantifier,
    parse_formula,
    sanitize_name,
    validate_signature,
)
from .prover import (
    CheckReport,
    ProverBackend,
    ProverError,
    ProverMessage,
    SessionHandle,
    SpanUnmapped,
    build_report,
    check_theory,
    locate_failed_step,
    start_session,
    syntax_error_count,
)
from .theory import (
    Axiom,
    DanglingFactReference,
    MalformedPremise,
    OpenFormula,
    ProofStep,
    StepKind,
    TheoryDoc,
    TheoryError,
    TheoryParseError,
    build_axioms,
    build_theorem,
    parse_theory,
)
from .prover.messages import ErrorClass, Span

log = logging.getLogger(__name__)

FINAL_STATUSES = ("valid_initially", "refined_valid", "exhausted_invalid")

PROBLEM_SOURCES = ("entailment", "mcqa")


class PipelineError(Exception):
    """Base class for pipeline failures."""


class StageFailed(PipelineError):
    """A required stage produced unusable output."""

    def __init__(self, stage: StageKind, reason: str):
        self.stage = stage
        self.reason = reason
        super().__init__("stage %s failed: %s" % (stage.value, reason))


class FormulaRejected(PipelineError):
    """A produced formula could not be adopted into the theory."""

    def __init__(self, sentence_id: str, detail: str):
        self.sentence_id = sentence_id
        self.detail = detail
        super().__init__(detail)


class BackendUnavailable(PipelineError):
    """The prover backend could not provide a session."""


@dataclass(frozen=True)
class Fact:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("fact id must be non-empty")
        if not self.text.strip():
            raise ValueError("fact text must be non-empty")


@dataclass(frozen=True)
class NLIProblem:
    id: str
    premise_text: Optional[str]
    hypothesis_text: str
    explanation: Tuple[Fact, ...]
    source: str = "entailment"
    annotations: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "explanation", tuple(self.explanation))
        object.__setattr__(self, "annotations", dict(self.annotations))
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if not self.hypothesis_text.strip():
            raise ValueError("hypothesis must be non-empty")
        if self.source not in PROBLEM_SOURCES:
            raise ValueError("source must be one of %s" % (PROBLEM_SOURCES,))
        ids = [f.id for f in self.explanation]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate fact ids: %s" % ids)

    @property
    def dataset(self) -> str:
        return self.annotations.get("dataset", "default")


@dataclass(frozen=True)
class InferenceStrategy:
    narrative: str
    relevant_fact_ids: Tuple[str, ...] = ()
    redundant_fact_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "relevant_fact_ids", tuple(self.relevant_fact_ids))
        object.__setattr__(self, "redundant_fact_ids", tuple(self.redundant_fact_ids))
        overlap = set(self.relevant_fact_ids) & set(self.redundant_fact_ids)
        if overlap:
            raise ValueError("fact ids marked both relevant and redundant: %s" % overlap)


@dataclass(frozen=True)
class FeedbackBundle:
    error_message: str
    failed_step: Optional[ProofStep] = None
    failed_step_index: Optional[int] = None
    strategy: Optional[InferenceStrategy] = None
    relevant_axioms: Tuple[Axiom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "relevant_axioms", tuple(self.relevant_axioms))


@dataclass(frozen=True)
class IterationRecord:
    explanation_before: Tuple[Fact, ...]
    theory: Optional[TheoryDoc]
    syntax_iterations_used: int
    syntax_errors_before: int
    syntax_errors_after: int
    report: CheckReport
    feedback: Optional[FeedbackBundle]
    explanation_after: Tuple[Fact, ...]
    proof_steps_suggested: int = 0
    proof_steps_processed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "explanation_before", tuple(self.explanation_before))
        object.__setattr__(self, "explanation_after", tuple(self.explanation_after))


@dataclass(frozen=True)
class RefinementTrace:
    problem_id: str
    dataset: str
    iterations: Tuple[IterationRecord, ...]
    final_status: str
    total_iterations: int
    diagnostic: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "iterations", tuple(self.iterations))
        if self.final_status not in FINAL_STATUSES:
            raise ValueError("bad final_status: %r" % self.final_status)
        for prev, cur in zip(self.iterations, self.iterations[1:]):
            if prev.explanation_after != cur.explanation_before:
                raise ValueError("iteration explanations do not chain")


@dataclass
class RefinerConfig:
    llm: LLMConfig
    backend: ProverBackend
    mode: str = "live"
    cache: Optional[TranscriptCache] = None
    transport: Optional[Transport] = None
    max_refinement_iterations: int = 10
    syntax_iterations: int = 3
    timeout_s: float = 65.0


class PipelineContext:
    """Per-problem state: stage plumbing plus formalisation caches."""

    def __init__(self, cfg: RefinerConfig, problem: NLIProblem):
        self.cfg = cfg
        self.events: Dict[str, List[str]] = {}
        self.formulas: Dict[Tuple[str, str], str] = {}
        self.used_ids: Set[str] = {f.id for f in problem.explanation}
        self._counter = 0
        for fact_id in self.used_ids:
            match = re.fullmatch(r"f(\d+)", fact_id)
            if match:
                self._counter = max(self._counter, int(match.group(1)))

    def complete(self, stage: StageKind, bindings: Mapping[str, str]) -> str:
        return complete(
            stage,
            bindings,
            self.cfg.llm,
            self.cfg.mode,
            self.cfg.cache,
            self.cfg.transport,
        )

    def next_fact_id(self) -> str:
        while True:
            self._counter += 1
            candidate = "f%d" % self._counter
            if candidate not in self.used_ids:
                self.used_ids.add(candidate)
                return candidate


# ---------------------------------------------------------------------------
# Formalisation

_ROLE_PREMISE = "premise"
_ROLE_FACT = "explanation fact"
_ROLE_HYPOTHESIS = "hypothesis"


def _detect_events(sentences: Sequence[str], ctx: PipelineContext):
    pending = [s for s in sentences if s not in ctx.events]
    if not pending:
        return
    numbered = "\n".join("%d. %s" % (i + 1, s) for i, s in enumerate(pending))
    try:
        raw = ctx.complete(StageKind.DETECT_EVENTS, {"sentences": numbered})
        rows = extract_stage_output(StageKind.DETECT_EVENTS, raw)
    except MalformedStageOutput as exc:
        raise StageFailed(StageKind.DETECT_EVENTS, exc.reason)
    verbs_by_index: Dict[int, List[str]] = {}
    for sentence_id, verbs in rows:
        digits = re.sub(r"\D", "", sentence_id)
        if digits:
            verbs_by_index[int(digits)] = verbs
    for i, sentence in enumerate(pending):
        ctx.events[sentence] = verbs_by_index.get(i + 1, [])


def _sentence_formula(sentence: str, role: str, ctx: PipelineContext) -> str:
    key = (role, sentence)
    cached = ctx.formulas.get(key)
    if cached is not None:
        return cached
    events = ctx.events.get(sentence, [])
    bindings = {
        "sentence": sentence,
        "role": role,
        "events": ", ".join(events) if events else "(none)",
    }
    try:
        raw = ctx.complete(StageKind.SENTENCE_TO_LOGIC, bindings)
        text = extract_stage_output(StageKind.SENTENCE_TO_LOGIC, raw)
    except MalformedStageOutput as exc:
        raise StageFailed(StageKind.SENTENCE_TO_LOGIC, exc.reason)
    ctx.formulas[key] = text
    return text


def _parse_sentence_formula(sentence_id: str, text: str) -> Formula:
    try:
        return parse_formula(text)
    except ParseError as exc:
        raise FormulaRejected(
            sentence_id,
            "Inner syntax error in the formula for %s: %s" % (sentence_id, exc),
        )
    except LogicError as exc:
        raise FormulaRejected(
            sentence_id,
            "Type unification failed in the formula for %s: %s" % (sentence_id, exc),
        )


def formalise(
    problem: NLIProblem,
    cfg: RefinerConfig,
    explanation: Optional[Sequence[Fact]] = None,
    ctx: Optional[PipelineContext] = None,
) -> TheoryDoc:
    """Autoformalise a problem into a proofless theory document."""
    if ctx is None:
        ctx = PipelineContext(cfg, problem)
    facts = tuple(explanation if explanation is not None else problem.explanation)

    sentences = []
    if problem.premise_text:
        sentences.append(problem.premise_text)
    sentences.extend(f.text for f in facts)
    sentences.append(problem.hypothesis_text)
    _detect_events(sentences, ctx)

    premise_formula: Optional[Formula] = None
    if problem.premise_text:
        text = _sentence_formula(problem.premise_text, _ROLE_PREMISE, ctx)
        premise_formula = _parse_sentence_formula("premise", text)

    fact_formulas: List[Tuple[str, Formula, str]] = []
    for fact in facts:
        text = _sentence_formula(fact.text, _ROLE_FACT, ctx)
        fact_formulas.append(
            (fact.id, _parse_sentence_formula(fact.id, text), fact.text)
        )

    goal_text = _sentence_formula(problem.hypothesis_text, _ROLE_HYPOTHESIS, ctx)
    goal = _parse_sentence_formula("hypothesis", goal_text)

    try:
        axioms = build_axioms(fact_formulas)
        theorem = build_theorem(
            premise_formula,
            goal,
            problem.premise_text or "",
            problem.hypothesis_text,
        )
    except OpenFormula as exc:
        raise FormulaRejected(
            exc.fact_id, "Malformed formula for %s: %s" % (exc.fact_id, exc)
        )
    except MalformedPremise as exc:
        raise FormulaRejected("premise", "Malformed premise: %s" % exc)

    ordered = [f for _, f, _ in fact_formulas]
    if premise_formula is not None:
        ordered.append(premise_formula)
    ordered.append(goal)
    try:
        signature = validate_signature(ordered)
    except ArityConflict as exc:
        raise FormulaRejected(exc.name, "Type unification failed: %s" % exc)

    return TheoryDoc(
        name=sanitize_name(problem.id),
        signature=signature,
        axioms=tuple(axioms),
        theorem=theorem,
    )


# ---------------------------------------------------------------------------
# Syntax repair sub-loop

@dataclass(frozen=True)
class SyntaxLoopOutcome:
    doc: TheoryDoc
    iterations_used: int
    errors_before: int
    errors_after: int
    last_report: CheckReport


def _format_errors(report: CheckReport, doc: TheoryDoc) -> str:
    from .prover import classify_error
    from .theory import proof_region

    region = proof_region(doc)
    lines = []
    for message in report.errors():
        cls = classify_error(message, region)
        where = " (line %d)" % message.span.line if message.span else ""
        lines.append("- [%s]%s %s" % (cls.value, where, message.text))
    return "\n".join(lines) if lines else "(none)"


def refine_syntax_loop(
    doc: TheoryDoc,
    handle: SessionHandle,
    cfg: RefinerConfig,
    ctx: Optional[PipelineContext] = None,
    problem: Optional[NLIProblem] = None,
) -> SyntaxLoopOutcome:
    """Check the proofless theory and repair syntax errors, at most
    cfg.syntax_iterations times.  Residual errors are carried forward."""
    if ctx is None:
        if problem is None:
            raise ValueError("refine_syntax_loop needs a context or a problem")
        ctx = PipelineContext(cfg, problem)
    current = doc.without_proof()
    report = check_theory(handle, current, cfg.timeout_s)
    before = syntax_error_count(report, current)
    used = 0
    remaining = before
    while remaining > 0 and used < cfg.syntax_iterations:
        bindings = {
            "theory": current.rendered,
            "errors": _format_errors(report, current),
        }
        try:
            raw = ctx.complete(StageKind.REFINE_SYNTAX, bindings)
            corrected = extract_stage_output(StageKind.REFINE_SYNTAX, raw)
            candidate = parse_theory(corrected)
            # The theory name is part of the problem contract; a repair
            # that rewrote it would break span bookkeeping downstream.
            current = replace(candidate.without_proof(), name=current.name)
        except (MalformedStageOutput, TheoryParseError, TheoryError) as exc:
            log.debug("syntax repair attempt unusable: %s", exc)
        used += 1
        report = check_theory(handle, current, cfg.timeout_s)
        remaining = syntax_error_count(report, current)
    return SyntaxLoopOutcome(current, used, before, remaining, report)


# ---------------------------------------------------------------------------
# Rough inference and proof construction

def _facts_listing(facts: Sequence[Fact]) -> str:
    if not facts:
        return "(none)"
    return "\n".join("%s: %s" % (f.id, f.text) for f in facts)


def infer_and_prove(
    problem: NLIProblem,
    doc: TheoryDoc,
    cfg: RefinerConfig,
    explanation: Optional[Sequence[Fact]] = None,
    ctx: Optional[PipelineContext] = None,
) -> Tuple[Optional[InferenceStrategy], Tuple[ProofStep, ...], TheoryDoc]:
    """Sketch the argument, then construct and attach a linear proof.

    Either stage may fail; the round then proceeds with what it has
    (no strategy, or no proof steps) and the check reports accordingly.
    """
    if ctx is None:
        ctx = PipelineContext(cfg, problem)
    facts = tuple(explanation if explanation is not None else problem.explanation)
    known_ids = [f.id for f in facts]

    strategy: Optional[InferenceStrategy]
    try:
        raw = ctx.complete(
            StageKind.ROUGH_INFERENCE,
            {
                "premise": problem.premise_text or "(none)",
                "hypothesis": problem.hypothesis_text,
                "facts": _facts_listing(facts),
            },
        )
        payload = extract_stage_output(StageKind.ROUGH_INFERENCE, raw)
        relevant = tuple(i for i in known_ids if i in set(payload["relevant"]))
        redundant = tuple(
            i
            for i in known_ids
            if i in set(payload["redundant"]) and i not in relevant
        )
        strategy = InferenceStrategy(payload["narrative"], relevant, redundant)
    except MalformedStageOutput as exc:
        log.debug("rough inference unusable: %s", exc)
        strategy = None

    steps: Tuple[ProofStep, ...] = ()
    if strategy is not None:
        try:
            raw = ctx.complete(
                StageKind.CONSTRUCT_PROOF,
                {"theory": doc.rendered, "strategy": strategy.narrative or "(none)"},
            )
            # Step goal texts arrive normalised by the proof-line parser.
            steps = tuple(extract_stage_output(StageKind.CONSTRUCT_PROOF, raw))
            candidate = doc.with_proof(steps)
            candidate.rendered  # renders eagerly; flags dangling references
            doc = candidate
        except (MalformedStageOutput, DanglingFactReference, TheoryError) as exc:
            log.debug("proof construction unusable: %s", exc)
            steps = ()
    return strategy, steps, doc


# ---------------------------------------------------------------------------
# Fact filtering and explanation refinement

def filter_facts(
    explanation: Sequence[Fact],
    strategy: Optional[InferenceStrategy],
    steps: Sequence[ProofStep],
) -> List[Fact]:
    """Keep exactly the facts the proof attempt used.

    A fact survives when its positional axiom name appears in some
    step's citations, or the strategy lists its id as relevant.  Order
    is preserved; the result is always a subsequence of the input.
    """
    cited: Set[str] = set()
    for step in steps:
        cited.update(step.facts_used)
    relevant = set(strategy.relevant_fact_ids) if strategy is not None else set()
    kept = []
    for index, fact in enumerate(explanation):
        axiom_name = "explanation_%d" % (index + 1)
        if axiom_name in cited or fact.id in relevant:
            kept.append(fact)
    return kept


def _describe_step(step: Optional[ProofStep], index: Optional[int]) -> str:
    if step is None:
        return "(none)"
    if step.kind is StepKind.FROM_ASM_HAVE:
        body = 'from asm have "%s"' % step.goal_text
    elif step.kind is StepKind.THEN_HAVE:
        body = 'then have "%s"' % step.goal_text
    else:
        body = "then show ?thesis"
    extras = [n for n in step.facts_used if n != "asm"] if step.kind is StepKind.FROM_ASM_HAVE else list(step.facts_used)
    if extras:
        body += " using %s" % " ".join(extras)
    prefix = "step %d: " % (index + 1) if index is not None else ""
    return prefix + body + " by " + step.tactic


def refine_explanation(
    bundle: FeedbackBundle,
    problem: NLIProblem,
    current: Sequence[Fact],
    cfg: RefinerConfig,
    ctx: Optional[PipelineContext] = None,
) -> Tuple[Fact, ...]:
    """Rewrite the explanation using prover feedback.

    Sentences that come back verbatim keep their fact ids; anything new
    or reworded gets a fresh id.  A malformed response leaves the
    explanation unchanged.
    """
    if ctx is None:
        ctx = PipelineContext(cfg, problem)
        ctx.used_ids.update(f.id for f in current)
    current = tuple(current)
    relevant_sentences = "\n".join(
        "- " + a.source_text for a in bundle.relevant_axioms if a.source_text
    ) or "(none)"
    bindings = {
        "premise": problem.premise_text or "(none)",
        "hypothesis": problem.hypothesis_text,
        "facts": _facts_listing(current),
        "error_message": bundle.error_message or "(none)",
        "failed_step": _describe_step(bundle.failed_step, bundle.failed_step_index),
        "strategy": bundle.strategy.narrative if bundle.strategy else "(none)",
        "relevant_sentences": relevant_sentences,
    }
    try:
        raw = ctx.complete(StageKind.REFINE_EXPLANATION, bindings)
        sentences = extract_stage_output(StageKind.REFINE_EXPLANATION, raw)
    except MalformedStageOutput as exc:
        log.debug("refinement stage unusable: %s", exc)
        return current
    by_text = {f.text: f for f in current}
    facts: List[Fact] = []
    seen: Set[str] = set()
    for sentence in sentences:
        existing = by_text.get(sentence)
        fact = existing if existing is not None else Fact(ctx.next_fact_id(), sentence)
        if fact.id in seen:
            continue
        seen.add(fact.id)
        facts.append(fact)
    return tuple(facts)


# ---------------------------------------------------------------------------
# The driver

def _synthetic_failure_report(text: str) -> CheckReport:
    return build_report("failed", [ProverMessage("error", text)], 0.0, None)


def _assemble_feedback(
    report: CheckReport,
    doc: Optional[TheoryDoc],
    strategy: Optional[InferenceStrategy],
) -> FeedbackBundle:
    if report.first_error is not None:
        error_text = report.first_error[0].text
    else:
        error_text = "prover reported failure without messages"
    failed_step = None
    failed_index = None
    relevant: Tuple[Axiom, ...] = ()
    if doc is not None and doc.proof:
        try:
            located = locate_failed_step(report, doc)
        except SpanUnmapped:
            located = None
        if located is not None:
            failed_index, names = located
            failed_step = doc.proof[failed_index]
            by_name = {a.name: a for a in doc.axioms}
            relevant = tuple(by_name[n] for n in names if n in by_name)
    return FeedbackBundle(error_text, failed_step, failed_index, strategy, relevant)


def _run_iteration(
    problem: NLIProblem,
    explanation: Tuple[Fact, ...],
    cfg: RefinerConfig,
    ctx: PipelineContext,
    handle: SessionHandle,
) -> IterationRecord:
    try:
        doc = formalise(problem, cfg, explanation, ctx)
    except (StageFailed, FormulaRejected) as exc:
        report = _synthetic_failure_report(str(exc))
        bundle = FeedbackBundle(str(exc))
        return IterationRecord(
            explanation_before=explanation,
            theory=None,
            syntax_iterations_used=0,
            syntax_errors_before=0,
            syntax_errors_after=0,
            report=report,
            feedback=bundle,
            explanation_after=explanation,
        )
    syntax = refine_syntax_loop(doc, handle, cfg, ctx)
    doc = syntax.doc
    strategy, steps, doc = infer_and_prove(problem, doc, cfg, explanation, ctx)
    report = check_theory(handle, doc, cfg.timeout_s)
    if report.status == "valid":
        feedback = None
        processed = len(steps)
    else:
        feedback = _assemble_feedback(report, doc, strategy)
        processed = (
            feedback.failed_step_index
            if feedback.failed_step_index is not None
            else 0
        )
    return IterationRecord(
        explanation_before=explanation,
        theory=doc,
        syntax_iterations_used=syntax.iterations_used,
        syntax_errors_before=syntax.errors_before,
        syntax_errors_after=syntax.errors_after,
        report=report,
        feedback=feedback,
        explanation_after=explanation,
        proof_steps_suggested=len(steps),
        proof_steps_processed=processed,
    )


def run_refiner(problem: NLIProblem, cfg: RefinerConfig) -> RefinementTrace:
    """Run the full loop on one problem and return its trace."""
    ctx = PipelineContext(cfg, problem)
    explanation = tuple(problem.explanation)
    iterations: List[IterationRecord] = []
    rounds = 0
    diagnostic: Optional[str] = None
    final = "exhausted_invalid"
    while True:
        try:
            handle = start_session(cfg.backend)
        except (ProverError, OSError) as exc:
            diagnostic = "backend unavailable: %s" % exc
            break
        try:
            record = _run_iteration(problem, explanation, cfg, ctx, handle)
        finally:
            handle.close()
        if record.report.status == "valid":
            iterations.append(record)
            final = "valid_initially" if rounds == 0 else "refined_valid"
            break
        if rounds >= cfg.max_refinement_iterations:
            iterations.append(record)
            break
        filtered = (
            filter_facts(explanation, record.feedback.strategy, tuple(record.theory.proof) if record.theory else ())
            if record.feedback is not None and record.feedback.strategy is not None
            else list(explanation)
        )
        refined = refine_explanation(
            record.feedback or FeedbackBundle("prover reported failure"),
            problem,
            filtered,
            cfg,
            ctx,
        )
        record = replace(record, explanation_after=refined)
        iterations.append(record)
        explanation = refined
        rounds += 1
    return RefinementTrace(
        problem_id=problem.id,
        dataset=problem.dataset,
        iterations=tuple(iterations),
        final_status=final,
        total_iterations=rounds,
        diagnostic=diagnostic,
    )


# ---------------------------------------------------------------------------
# Trace serialisation

def _fact_to_dict(fact: Fact) -> dict:
    return {"id": fact.id, "text": fact.text}


def _message_to_dict(message: ProverMessage) -> dict:
    return {
        "severity": message.severity,
        "text": message.text,
        "span": list(message.span) if message.span is not None else None,
    }


def _report_to_dict(report: CheckReport) -> dict:
    first = None
    if report.first_error is not None:
        message, cls = report.first_error
        first = {"index": report.messages.index(message), "class": cls.value}
    return {
        "status": report.status,
        "elapsed": report.elapsed,
        "messages": [_message_to_dict(m) for m in report.messages],
        "first_error": first,
    }


def _step_to_dict(step: ProofStep) -> dict:
    return {
        "kind": step.kind.value,
        "goal_text": step.goal_text,
        "facts_used": list(step.facts_used),
        "tactic": step.tactic,
    }


def _strategy_to_dict(strategy: InferenceStrategy) -> dict:
    return {
        "narrative": strategy.narrative,
        "relevant_fact_ids": list(strategy.relevant_fact_ids),
        "redundant_fact_ids": list(strategy.redundant_fact_ids),
    }


def _feedback_to_dict(bundle: FeedbackBundle) -> dict:
    return {
        "error_message": bundle.error_message,
        "failed_step": _step_to_dict(bundle.failed_step)
        if bundle.failed_step is not None
        else None,
        "failed_step_index": bundle.failed_step_index,
        "strategy": _strategy_to_dict(bundle.strategy)
        if bundle.strategy is not None
        else None,
        "relevant_axioms": [a.name for a in bundle.relevant_axioms],
    }


def _iteration_to_dict(record: IterationRecord) -> dict:
    return {
        "explanation_before": [_fact_to_dict(f) for f in record.explanation_before],
        "theory": record.theory.rendered if record.theory is not None else None,
        "syntax_iterations_used": record.syntax_iterations_used,
        "syntax_errors_before": record.syntax_errors_before,
        "syntax_errors_after": record.syntax_errors_after,
        "report": _report_to_dict(record.report),
        "feedback": _feedback_to_dict(record.feedback)
        if record.feedback is not None
        else None,
        "explanation_after": [_fact_to_dict(f) for f in record.explanation_after],
        "proof_steps_suggested": record.proof_steps_suggested,
        "proof_steps_processed": record.proof_steps_processed,
    }


def trace_to_dict(trace: RefinementTrace) -> dict:
    return {
        "problem_id": trace.problem_id,
        "dataset": trace.dataset,
        "final_status": trace.final_status,
        "total_iterations": trace.total_iterations,
        "diagnostic": trace.diagnostic,
        "iterations": [_iteration_to_dict(r) for r in trace.iterations],
    }


def _message_from_dict(data: dict) -> ProverMessage:
    span = Span(*data["span"]) if data.get("span") is not None else None
    return ProverMessage(data["severity"], data["text"], span)


def _report_from_dict(data: dict) -> CheckReport:
    messages = tuple(_message_from_dict(m) for m in data["messages"])
    first = None
    if data.get("first_error") is not None:
        first = (
            messages[data["first_error"]["index"]],
            ErrorClass(data["first_error"]["class"]),
        )
    return CheckReport(data["status"], messages, data["elapsed"], first)


def _step_from_dict(data: dict) -> ProofStep:
    return ProofStep(
        StepKind(data["kind"]),
        data["goal_text"],
        tuple(data["facts_used"]),
        data["tactic"],
    )


def _feedback_from_dict(data: dict, doc: Optional[TheoryDoc]) -> FeedbackBundle:
    strategy = None
    if data.get("strategy") is not None:
        s = data["strategy"]
        strategy = InferenceStrategy(
            s["narrative"],
            tuple(s["relevant_fact_ids"]),
            tuple(s["redundant_fact_ids"]),
        )
    axioms: Tuple[Axiom, ...] = ()
    if doc is not None:
        by_name = {a.name: a for a in doc.axioms}
        axioms = tuple(
            by_name[n] for n in data.get("relevant_axioms", []) if n in by_name
        )
    return FeedbackBundle(
        data["error_message"],
        _step_from_dict(data["failed_step"])
        if data.get("failed_step") is not None
        else None,
        data.get("failed_step_index"),
        strategy,
        axioms,
    )


def _iteration_from_dict(data: dict) -> IterationRecord:
    doc = None
    if data.get("theory"):
        doc = parse_theory(data["theory"])
    return IterationRecord(
        explanation_before=tuple(
            Fact(f["id"], f["text"]) for f in data["explanation_before"]
        ),
        theory=doc,
        syntax_iterations_used=data["syntax_iterations_used"],
        syntax_errors_before=data["syntax_errors_before"],
        syntax_errors_after=data["syntax_errors_after"],
        report=_report_from_dict(data["report"]),
        feedback=_feedback_from_dict(data["feedback"], doc)
        if data.get("feedback") is not None
        else None,
        explanation_after=tuple(
            Fact(f["id"], f["text"]) for f in data["explanation_after"]
        ),
        proof_steps_suggested=data.get("proof_steps_suggested", 0),
        proof_steps_processed=data.get("proof_steps_processed", 0),
    )


def trace_from_dict(data: dict) -> RefinementTrace:
    return RefinementTrace(
        problem_id=data["problem_id"],
        dataset=data.get("dataset", "default"),
        iterations=tuple(_iteration_from_dict(r) for r in data["iterations"]),
        final_status=data["final_status"],
        total_iterations=data["total_iterations"],
        diagnostic=data.get("diagnostic"),
    )
