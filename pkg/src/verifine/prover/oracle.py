"""Ground-enumeration prover backend.

Quantifiers are grounded over a fixed constant pool: every free variable
of the premise (and of any proof-step goal) acts as a named constant,
plus `domain_bound` fresh anonymous constants.  Universals expand to
conjunctions over the pool, existentials to disjunctions.  Entailment of
a goal from premises is then decided propositionally: the premises plus
the negated goal are clausified and handed to a small DPLL solver, and
the goal is entailed exactly when that set is unsatisfiable.

A document without proof steps is checked as one entailment (assumption
and axioms against the theorem goal).  A document with a proof is checked
step by step the way an interactive prover would: each step's goal must
follow from the chained previous goal plus whatever facts the step cites.
"""

import itertools
import time
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from ..logic import (
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Variable,
    free_variables,
)
from ..theory import (
    ASSUMPTION_NAME,
    StepKind,
    TheoryDoc,
    TheoryError,
    TheoryParseError,
    parse_inner_formula,
    proof_step_lines,
)
from .messages import (
    CheckReport,
    ProverMessage,
    ProverError,
    Span,
    build_report,
)


class OracleTimeout(ProverError):
    """Internal signal: the solve budget ran out."""


class UnsupportedCheck(ProverError):
    """The oracle only checks structured documents, not raw theory text."""


# --- propositional layer ---------------------------------------------------

def _satisfiable(
    clauses: List[List[int]], nvars: int, deadline: Optional[float] = None
) -> bool:
    """DPLL with unit propagation and chronological backtracking."""
    for clause in clauses:
        if not clause:
            return False
    occ: Dict[int, List[int]] = {}
    for idx, clause in enumerate(clauses):
        for lit in clause:
            occ.setdefault(lit, []).append(idx)

    assign: Dict[int, bool] = {}
    trail: List[int] = []
    decisions: List[Tuple[int, int, bool]] = []  # (trail mark, literal, flipped)

    def val(lit: int) -> Optional[bool]:
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v == (lit > 0)

    def push(lit: int):
        assign[abs(lit)] = lit > 0
        trail.append(lit)

    def propagate(start: int) -> Optional[int]:
        qi = start
        steps = 0
        while qi < len(trail):
            steps += 1
            if deadline is not None and steps % 64 == 0:
                if time.monotonic() > deadline:
                    raise OracleTimeout()
            lit = trail[qi]
            qi += 1
            for ci in occ.get(-lit, ()):
                clause = clauses[ci]
                unassigned = None
                open_count = 0
                satisfied = False
                for l in clause:
                    v = val(l)
                    if v is True:
                        satisfied = True
                        break
                    if v is None:
                        open_count += 1
                        unassigned = l
                        if open_count > 1:
                            break
                if satisfied or open_count > 1:
                    continue
                if open_count == 0:
                    return ci
                push(unassigned)
        return None

    for clause in clauses:
        if len(clause) == 1:
            v = val(clause[0])
            if v is False:
                return False
            if v is None:
                push(clause[0])
    if propagate(0) is not None:
        return False

    while True:
        if deadline is not None and time.monotonic() > deadline:
            raise OracleTimeout()
        var = 1
        while var <= nvars and var in assign:
            var += 1
        if var > nvars:
            return True
        decisions.append((len(trail), var, False))
        push(var)
        start = len(trail) - 1
        while True:
            conflict = propagate(start)
            if conflict is None:
                break
            while decisions and decisions[-1][2]:
                mark, _, _ = decisions.pop()
                while len(trail) > mark:
                    assign.pop(abs(trail.pop()))
            if not decisions:
                return False
            mark, lit, _ = decisions.pop()
            while len(trail) > mark:
                assign.pop(abs(trail.pop()))
            decisions.append((mark, -lit, True))
            push(-lit)
            start = len(trail) - 1


# --- grounding -------------------------------------------------------------

class _Grounder:
    """Maps ground atoms to propositional variables and clausifies."""

    def __init__(self, domain_size: int):
        self.domain = list(range(domain_size))
        self.atom_vars: Dict[Tuple[str, Tuple[int, ...]], int] = {}
        self.next_var = 1

    def atom_var(self, name: str, elems: Tuple[int, ...]) -> int:
        key = (name, elems)
        var = self.atom_vars.get(key)
        if var is None:
            var = self.next_var
            self.next_var += 1
            self.atom_vars[key] = var
        return var

    def new_aux(self) -> int:
        var = self.next_var
        self.next_var += 1
        return var

    def ground(self, f: Formula, env: Dict[str, int], neg: bool):
        if isinstance(f, Atom):
            elems = tuple(env[v.name] for v in f.args)
            var = self.atom_var(f.pred.name, elems)
            return ("lit", -var if neg else var)
        if isinstance(f, Not):
            return self.ground(f.child, env, not neg)
        if isinstance(f, And):
            kind = "or" if neg else "and"
            return self._merge(
                kind,
                [self.ground(f.left, env, neg), self.ground(f.right, env, neg)],
            )
        if isinstance(f, Or):
            kind = "and" if neg else "or"
            return self._merge(
                kind,
                [self.ground(f.left, env, neg), self.ground(f.right, env, neg)],
            )
        if isinstance(f, Implies):
            kind = "and" if neg else "or"
            return self._merge(
                kind,
                [self.ground(f.left, env, not neg), self.ground(f.right, env, neg)],
            )
        if isinstance(f, (Forall, Exists)):
            universal = isinstance(f, Forall)
            kind = "and" if universal != neg else "or"
            parts = []
            names = [v.name for v in f.vars]
            for combo in itertools.product(self.domain, repeat=len(names)):
                inner_env = dict(env)
                inner_env.update(zip(names, combo))
                parts.append(self.ground(f.body, inner_env, neg))
            return self._merge(kind, parts)
        raise TypeError("not a formula: %r" % (f,))

    @staticmethod
    def _merge(kind: str, parts: List):
        flat = []
        for part in parts:
            if part[0] == kind:
                flat.extend(part[1])
            else:
                flat.append(part)
        return (kind, flat)

    def clausify(self, tree) -> List[List[int]]:
        if tree[0] == "lit":
            return [[tree[1]]]
        if tree[0] == "and":
            out: List[List[int]] = []
            for child in tree[1]:
                out.extend(self.clausify(child))
            return out
        clause: List[int] = []
        extra: List[List[int]] = []
        for child in tree[1]:
            if child[0] == "lit":
                clause.append(child[1])
            else:
                aux = self.new_aux()
                clause.append(aux)
                for sub in self.clausify(child):
                    extra.append([-aux] + sub)
        return [clause] + extra


def _collect_free_names(formulas: Iterable[Formula]) -> List[str]:
    names: List[str] = []
    for f in formulas:
        for v in sorted(free_variables(f), key=lambda v: v.name):
            if v.name not in names:
                names.append(v.name)
    return names


def entails(
    premises: Sequence[Formula],
    goal: Formula,
    fresh_constants: int,
    deadline: Optional[float] = None,
) -> bool:
    """Ground entailment at the configured bound.

    The constant pool is one element per free variable occurring in the
    premises or the goal, plus `fresh_constants` anonymous elements.
    """
    frees = _collect_free_names(list(premises) + [goal])
    domain_size = len(frees) + fresh_constants
    if domain_size == 0:
        domain_size = 1
    grounder = _Grounder(domain_size)
    env = {name: idx for idx, name in enumerate(frees)}
    clauses: List[List[int]] = []
    for premise in premises:
        clauses.extend(grounder.clausify(grounder.ground(premise, env, False)))
    clauses.extend(grounder.clausify(grounder.ground(goal, env, True)))
    return not _satisfiable(clauses, grounder.next_var - 1, deadline)


# --- document checking -----------------------------------------------------

def _shows_line(doc: TheoryDoc) -> int:
    for idx, line in enumerate(doc.rendered.split("\n"), start=1):
        if line.startswith("  shows "):
            return idx
    return 1


def _line_message(doc: TheoryDoc, line_no: int, text: str) -> ProverMessage:
    from ..theory import line_span

    start, end = line_span(doc.rendered, line_no)
    return ProverMessage("error", text, Span(line_no, start, end))


class OracleSession:
    """Session handle for the ground oracle; stateless between checks."""

    def __init__(self, domain_bound: int):
        if domain_bound < 1:
            raise ValueError("domain_bound must be >= 1")
        self.domain_bound = domain_bound
        self.closed = False

    def check_document(self, doc: TheoryDoc, timeout_s: float = 65.0) -> CheckReport:
        started = time.monotonic()
        deadline = started + timeout_s
        try:
            if doc.proof:
                report = self._check_proof(doc, deadline, started)
            else:
                report = self._check_direct(doc, deadline, started)
        except OracleTimeout:
            elapsed = time.monotonic() - started
            message = ProverMessage(
                "error", "Timeout: solve budget of %.1fs exhausted" % timeout_s
            )
            report = build_report("timeout", [message], elapsed, doc)
        return report

    def check_source(self, text: str, name: str, timeout_s: float = 65.0):
        raise UnsupportedCheck(
            "the ground oracle checks structured documents, not raw text"
        )

    def close(self):
        self.closed = True

    # -- internals

    def _axiom_map(self, doc: TheoryDoc) -> Dict[str, Formula]:
        return {a.name: a.formula for a in doc.axioms}

    def _check_direct(
        self, doc: TheoryDoc, deadline: float, started: float
    ) -> CheckReport:
        premises = [a.formula for a in doc.axioms]
        if doc.theorem.premise_assumption is not None:
            premises.append(doc.theorem.premise_assumption)
        ok = entails(premises, doc.theorem.goal, self.domain_bound, deadline)
        elapsed = time.monotonic() - started
        if ok:
            return build_report("valid", [], elapsed, doc)
        message = _line_message(
            doc,
            _shows_line(doc),
            "Failed to finish proof: goal is not entailed from the assumptions "
            "at domain bound %d" % self.domain_bound,
        )
        return build_report("failed", [message], elapsed, doc)

    def _check_proof(
        self, doc: TheoryDoc, deadline: float, started: float
    ) -> CheckReport:
        axioms = self._axiom_map(doc)
        try:
            step_lines = proof_step_lines(doc)
        except TheoryError as exc:
            # A document whose proof cannot render (dangling citation)
            # still gets a report rather than an exception.
            message = ProverMessage("error", "Undefined fact: %s" % exc)
            return build_report(
                "failed", [message], time.monotonic() - started, None
            )
        previous: Optional[Formula] = None
        for index, step in enumerate(doc.proof):
            line_no = step_lines[index]
            premises: List[Formula] = []
            if step.kind is not StepKind.FROM_ASM_HAVE and previous is not None:
                premises.append(previous)
            for fact in step.facts_used:
                if fact == ASSUMPTION_NAME:
                    if doc.theorem.premise_assumption is not None:
                        premises.append(doc.theorem.premise_assumption)
                elif fact in axioms:
                    premises.append(axioms[fact])
                else:
                    message = _line_message(
                        doc, line_no, "Undefined fact: %r" % fact
                    )
                    return build_report(
                        "failed", [message], time.monotonic() - started, doc
                    )
            if step.kind is StepKind.THEN_SHOW_THESIS:
                goal = doc.theorem.goal
            else:
                try:
                    goal = parse_inner_formula(step.goal_text)
                except TheoryParseError as exc:
                    message = _line_message(
                        doc, line_no, "Inner syntax error in proof step: %s" % exc
                    )
                    return build_report(
                        "failed", [message], time.monotonic() - started, doc
                    )
            if not entails(premises, goal, self.domain_bound, deadline):
                message = _line_message(
                    doc,
                    line_no,
                    "Failed to finish proof: step goal is not entailed at "
                    "domain bound %d" % self.domain_bound,
                )
                return build_report(
                    "failed", [message], time.monotonic() - started, doc
                )
            if step.kind is not StepKind.THEN_SHOW_THESIS:
                previous = goal
        return build_report("valid", [], time.monotonic() - started, doc)
