"""Build and render prover theory documents.

A document declares one `entity` type, one boolean predicate constant per
predicate symbol, one named axiom per explanation sentence, and a single
theorem called `hypothesis` whose assumption is the premise formula and
whose goal is the hypothesis formula.  Proofs are linear: an opening
`from asm have`, any number of `then have` links, and a closing
`then show ?thesis`.

Rendered text uses the prover's ASCII escape sequences (\\<forall>,
\\<and>, ...) rather than raw Unicode, so the files survive transport
through channels that mangle non-ASCII bytes.  `parse_theory` inverts
`render_theory` and also tolerates raw Unicode connectives, which is what
a language model usually echoes back after a repair request.
"""

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .logic import (
    And,
    ArityConflict,
    ArityError,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    ParseError,
    PredicateSymbol,
    Signature,
    Variable,
    free_variables,
    has_quantifier,
    iter_atoms,
    validate_signature,
)


class TheoryError(Exception):
    """Base class for theory construction errors."""


class OpenFormula(TheoryError):
    """A formula that must be closed has free variables."""

    def __init__(self, fact_id: str, names: Iterable[str] = ()):
        self.fact_id = fact_id
        self.names = tuple(sorted(names))
        detail = "formula for %r must be closed" % fact_id
        if self.names:
            detail += " (free: %s)" % ", ".join(self.names)
        super().__init__(detail)


class MalformedPremise(TheoryError):
    """The premise assumption may not contain quantifiers."""


class DanglingFactReference(TheoryError):
    """A proof step cites a fact name the theory never declares."""

    def __init__(self, step_index: int, name: str):
        self.step_index = step_index
        self.name = name
        super().__init__("step %d cites undeclared fact %r" % (step_index, name))


class TheoryParseError(TheoryError):
    """Theory text does not follow the rendered layout."""


AXIOM_NAME_RE = re.compile(r"explanation_[1-9][0-9]*\Z")

ASSUMPTION_NAME = "asm"
THEOREM_NAME = "hypothesis"
ENTITY_TYPE = "entity"


@dataclass(frozen=True)
class Axiom:
    name: str
    formula: Formula
    source_text: str = ""

    def __post_init__(self):
        if not AXIOM_NAME_RE.match(self.name):
            raise TheoryError("axiom name must be explanation_<k>: %r" % self.name)


@dataclass(frozen=True)
class TheoremBlock:
    premise_assumption: Optional[Formula]
    goal: Formula
    premise_text: str = ""
    hypothesis_text: str = ""


class StepKind(enum.Enum):
    FROM_ASM_HAVE = "from_asm_have"
    THEN_HAVE = "then_have"
    THEN_SHOW_THESIS = "then_show_thesis"


@dataclass(frozen=True)
class ProofStep:
    kind: StepKind
    goal_text: str = ""
    facts_used: Tuple[str, ...] = ()
    tactic: str = "blast"

    def __post_init__(self):
        object.__setattr__(self, "facts_used", tuple(self.facts_used))


def build_axioms(facts: Sequence[Tuple[str, Formula, str]]) -> List[Axiom]:
    """Turn (fact_id, formula, source_text) triples into numbered axioms.

    Axioms are named explanation_1, explanation_2, ... in list order.
    Raises OpenFormula when a fact formula has free variables.
    """
    axioms = []
    for k, (fact_id, formula, source_text) in enumerate(facts, start=1):
        free = free_variables(formula)
        if free:
            raise OpenFormula(fact_id, (v.name for v in free))
        axioms.append(Axiom("explanation_%d" % k, formula, source_text))
    return axioms


def build_theorem(
    premise: Optional[Formula],
    hypothesis: Formula,
    premise_text: str = "",
    hypothesis_text: str = "",
) -> TheoremBlock:
    """Assemble the theorem block.

    The premise may be absent (the assumption renders as "True") and must
    otherwise be quantifier-free; the hypothesis must be closed.
    """
    if premise is not None and has_quantifier(premise):
        raise MalformedPremise("premise assumption contains a quantifier")
    free = free_variables(hypothesis)
    if free:
        raise OpenFormula("hypothesis", (v.name for v in free))
    return TheoremBlock(premise, hypothesis, premise_text, hypothesis_text)


@dataclass(frozen=True)
class TheoryDoc:
    name: str
    signature: Signature
    axioms: Tuple[Axiom, ...]
    theorem: TheoremBlock
    proof: Tuple[ProofStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axioms", tuple(self.axioms))
        object.__setattr__(self, "proof", tuple(self.proof))
        if self.proof and self.proof[-1].kind is not StepKind.THEN_SHOW_THESIS:
            raise TheoryError("final proof step must be then_show_thesis")

    @property
    def rendered(self) -> str:
        return render_theory(self)

    def axiom_names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.axioms)

    def with_proof(self, proof: Sequence[ProofStep]) -> "TheoryDoc":
        return replace(self, proof=tuple(proof))

    def without_proof(self) -> "TheoryDoc":
        return replace(self, proof=())


# ---------------------------------------------------------------------------
# Inner-syntax rendering (prover side of the formula language)

_ESCAPES = [
    ("\\<forall>", "∀"),
    ("\\<exists>", "∃"),
    ("\\<and>", "∧"),
    ("\\<or>", "∨"),
    ("\\<not>", "¬"),
    ("\\<longrightarrow>", "⟶"),
    ("\\<rightarrow>", "→"),
    ("\\<Rightarrow>", "⇒"),
]

_LEVEL_QUANT = 0
_LEVEL_IMPLIES = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_NOT = 4


def _inner(f: Formula, need: int) -> str:
    if isinstance(f, Atom):
        return "%s %s" % (f.pred.name, " ".join(v.name for v in f.args))
    if isinstance(f, Not):
        text = "\\<not> " + _inner(f.child, _LEVEL_NOT)
        level = _LEVEL_NOT
    elif isinstance(f, And):
        text = "%s \\<and> %s" % (
            _inner(f.left, _LEVEL_AND + 1),
            _inner(f.right, _LEVEL_AND),
        )
        level = _LEVEL_AND
    elif isinstance(f, Or):
        text = "%s \\<or> %s" % (
            _inner(f.left, _LEVEL_OR + 1),
            _inner(f.right, _LEVEL_OR),
        )
        level = _LEVEL_OR
    elif isinstance(f, Implies):
        text = "%s \\<longrightarrow> %s" % (
            _inner(f.left, _LEVEL_IMPLIES + 1),
            _inner(f.right, _LEVEL_IMPLIES),
        )
        level = _LEVEL_IMPLIES
    elif isinstance(f, (Forall, Exists)):
        mark = "\\<forall>" if isinstance(f, Forall) else "\\<exists>"
        text = "%s%s. %s" % (
            mark,
            " ".join(v.name for v in f.vars),
            _inner(f.body, _LEVEL_QUANT),
        )
        level = _LEVEL_QUANT
    else:
        raise TypeError("not a formula: %r" % (f,))
    if level < need:
        return "(%s)" % text
    return text


def isabelle_formula(f: Formula) -> str:
    """Render a formula in prover inner syntax with ASCII escapes."""
    return _inner(f, _LEVEL_QUANT)


def _const_type(arity: int) -> str:
    return " \\<Rightarrow> ".join([ENTITY_TYPE] * arity + ["bool"])


def _comment(label: str, text: str) -> str:
    # "*)" inside the text would terminate the comment early.
    safe = text.replace("*)", "* )")
    return "(* %s: %s *)" % (label, safe)


def render_proof(
    steps: Sequence[ProofStep], axiom_names: Sequence[str]
) -> List[str]:
    """Render proof steps to Isar lines.

    Raises DanglingFactReference when a step cites a name that is neither
    the assumption nor a declared axiom.
    """
    known = {ASSUMPTION_NAME} | set(axiom_names)
    lines = []
    for idx, step in enumerate(steps):
        for name in step.facts_used:
            if name not in known:
                raise DanglingFactReference(idx, name)
        if step.kind is StepKind.FROM_ASM_HAVE:
            extras = [n for n in step.facts_used if n != ASSUMPTION_NAME]
            line = 'from %s have "%s"' % (ASSUMPTION_NAME, step.goal_text)
            if extras:
                line += " using %s" % " ".join(extras)
        elif step.kind is StepKind.THEN_HAVE:
            line = 'then have "%s"' % step.goal_text
            if step.facts_used:
                line += " using %s" % " ".join(step.facts_used)
        else:
            line = "then show ?thesis"
            if step.facts_used:
                line += " using %s" % " ".join(step.facts_used)
        lines.append("  %s by %s" % (line, step.tactic))
    return lines


def render_theory(doc: TheoryDoc) -> str:
    """Deterministically render the full theory document."""
    out: List[str] = []
    out.append("theory %s" % doc.name)
    out.append("imports Main")
    out.append("begin")
    out.append("")
    out.append("typedecl %s" % ENTITY_TYPE)
    out.append("")
    if doc.signature.predicates:
        out.append("consts")
        for pred in doc.signature.predicates:
            out.append('  %s :: "%s"' % (pred.name, _const_type(pred.arity)))
        out.append("")
    if doc.axioms:
        out.append("axiomatization where")
        for i, axiom in enumerate(doc.axioms):
            number = axiom.name.split("_")[-1]
            if axiom.source_text:
                out.append("  %s" % _comment("Explanation %s" % number, axiom.source_text))
            entry = '  %s: "%s"' % (axiom.name, isabelle_formula(axiom.formula))
            if i + 1 < len(doc.axioms):
                entry += " and"
            out.append(entry)
        out.append("")
    out.append("theorem %s:" % THEOREM_NAME)
    if doc.theorem.premise_text:
        out.append("  %s" % _comment("Premise", doc.theorem.premise_text))
    if doc.theorem.premise_assumption is None:
        out.append('  assumes %s: "True"' % ASSUMPTION_NAME)
    else:
        out.append(
            '  assumes %s: "%s"'
            % (ASSUMPTION_NAME, isabelle_formula(doc.theorem.premise_assumption))
        )
    if doc.theorem.hypothesis_text:
        out.append("  %s" % _comment("Hypothesis", doc.theorem.hypothesis_text))
    out.append('  shows "%s"' % isabelle_formula(doc.theorem.goal))
    if doc.proof:
        out.append("proof -")
        out.extend(render_proof(doc.proof, doc.axiom_names()))
        out.append("qed")
    out.append("")
    out.append("end")
    return "\n".join(out) + "\n"


def axioms_used(
    steps: Sequence[ProofStep], axiom_names: Sequence[str]
) -> Tuple[str, ...]:
    """Axiom names cited anywhere in the proof, first appearance order."""
    names = set(axiom_names)
    seen: List[str] = []
    for step in steps:
        for fact in step.facts_used:
            if fact in names and fact not in seen:
                seen.append(fact)
    return tuple(seen)


# ---------------------------------------------------------------------------
# Span bookkeeping over rendered text

def line_span(text: str, line_no: int) -> Tuple[int, int]:
    """1-based (start, end) character offsets of a 1-based line."""
    lines = text.split("\n")
    if not 1 <= line_no <= len(lines):
        raise ValueError("line %d out of range" % line_no)
    start = sum(len(l) + 1 for l in lines[: line_no - 1]) + 1
    return (start, start + len(lines[line_no - 1]))


def proof_region(doc: TheoryDoc) -> Optional[Tuple[int, int]]:
    """1-based line numbers of `proof -` and `qed`, when a proof exists."""
    if not doc.proof:
        return None
    lines = doc.rendered.split("\n")
    start = lines.index("proof -") + 1
    return (start, start + len(doc.proof) + 1)


def proof_step_lines(doc: TheoryDoc) -> List[int]:
    """1-based line number of each proof step in the rendered text."""
    region = proof_region(doc)
    if region is None:
        return []
    return [region[0] + 1 + i for i in range(len(doc.proof))]


# ---------------------------------------------------------------------------
# Parsing theory text back into structured form

def _unescape(text: str) -> str:
    for seq, uni in _ESCAPES:
        text = text.replace(seq, uni)
    return text


_INNER_SYMBOLS = {
    "∀": "FORALL",
    "∃": "EXISTS",
    "¬": "NOT",
    "∧": "AND",
    "∨": "OR",
    "⟶": "IMPLIES",
    "→": "IMPLIES",
    "(": "LPAREN",
    ")": "RPAREN",
    ".": "DOT",
    ",": "COMMA",
}

_INNER_WORD = re.compile(r"[A-Za-z][A-Za-z0-9_']*")


class _InnerParser:
    """Parser for prover inner syntax: curried atoms like `Agent e x`."""

    def __init__(self, text: str):
        self.text = _unescape(text)
        self.tokens = self._tokenize(self.text)
        self.i = 0

    @staticmethod
    def _tokenize(text: str):
        tokens = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            word = _INNER_WORD.match(text, i)
            if word:
                tokens.append(("IDENT", word.group(0)))
                i = word.end()
                continue
            kind = _INNER_SYMBOLS.get(ch)
            if kind is None:
                raise TheoryParseError("unexpected character %r in formula" % ch)
            tokens.append((kind, ch))
            i += 1
        tokens.append(("END", ""))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        if self.peek()[0] != kind:
            raise TheoryParseError(
                "expected %s, found %r" % (kind, self.peek()[1])
            )
        return self.advance()

    def parse(self) -> Formula:
        f = self.formula()
        if self.peek()[0] != "END":
            raise TheoryParseError("trailing input: %r" % self.peek()[1])
        return f

    def formula(self) -> Formula:
        if self.peek()[0] in ("FORALL", "EXISTS"):
            kind = self.advance()[0]
            vars_ = []
            while self.peek()[0] == "IDENT":
                vars_.append(Variable(self._clean(self.advance()[1])))
                if self.peek()[0] == "COMMA":
                    self.advance()
            if not vars_:
                raise TheoryParseError("quantifier without bound variables")
            self.expect("DOT")
            body = self.formula()
            cls = Forall if kind == "FORALL" else Exists
            try:
                return cls(tuple(vars_), body)
            except ValueError as exc:
                raise TheoryParseError(str(exc)) from exc
        return self.implication()

    def implication(self) -> Formula:
        left = self.disjunct()
        if self.peek()[0] == "IMPLIES":
            self.advance()
            return Implies(left, self.implication())
        return left

    def disjunct(self) -> Formula:
        left = self.conjunct()
        if self.peek()[0] == "OR":
            self.advance()
            return Or(left, self.disjunct())
        return left

    def conjunct(self) -> Formula:
        left = self.negation()
        if self.peek()[0] == "AND":
            self.advance()
            return And(left, self.conjunct())
        return left

    def negation(self) -> Formula:
        if self.peek()[0] == "NOT":
            self.advance()
            return Not(self.negation())
        return self.primary()

    @staticmethod
    def _clean(name: str) -> str:
        return name.replace("'", "_")

    def primary(self) -> Formula:
        kind, text = self.peek()
        if kind == "LPAREN":
            self.advance()
            inner = self.formula()
            self.expect("RPAREN")
            return inner
        if kind != "IDENT":
            raise TheoryParseError("expected formula, found %r" % text)
        name = self._clean(self.advance()[1])
        args: List[Variable] = []
        if self.peek()[0] == "LPAREN":
            # Tolerate canonical-style Atom(x, y) argument lists.
            self.advance()
            while self.peek()[0] == "IDENT":
                args.append(Variable(self._clean(self.advance()[1])))
                if self.peek()[0] == "COMMA":
                    self.advance()
            self.expect("RPAREN")
        else:
            while self.peek()[0] == "IDENT":
                args.append(Variable(self._clean(self.advance()[1])))
        if not args:
            raise TheoryParseError("predicate %r used without arguments" % name)
        try:
            return Atom(PredicateSymbol(name, len(args)), tuple(args))
        except (ValueError, ArityError) as exc:
            raise TheoryParseError(str(exc)) from exc


def parse_inner_formula(text: str) -> Formula:
    """Parse prover inner syntax (escaped or raw Unicode) to a Formula."""
    return _InnerParser(text).parse()


def parse_assumption(text: str) -> Optional[Formula]:
    """Parse an assumption string; the degenerate "True" maps to None."""
    if text.strip() == "True":
        return None
    return parse_inner_formula(text)


_PROOF_LINE_RES = [
    (
        StepKind.FROM_ASM_HAVE,
        re.compile(
            r"\s*from\s+asm\s+have\s+\"(?P<goal>.*)\"\s*"
            r"(?:using\s+(?P<facts>[A-Za-z0-9_ ]+?)\s*)?by\s+(?P<tactic>.+?)\s*$"
        ),
    ),
    (
        StepKind.THEN_HAVE,
        re.compile(
            r"\s*then\s+have\s+\"(?P<goal>.*)\"\s*"
            r"(?:using\s+(?P<facts>[A-Za-z0-9_ ]+?)\s*)?by\s+(?P<tactic>.+?)\s*$"
        ),
    ),
    (
        StepKind.THEN_SHOW_THESIS,
        re.compile(
            r"\s*then\s+show\s+\?thesis\s*"
            r"(?:using\s+(?P<facts>[A-Za-z0-9_ ]+?)\s*)?by\s+(?P<tactic>.+?)\s*$"
        ),
    ),
]


def _normalise_goal_text(text: str) -> str:
    # Step goals echoed back with raw Unicode (or odd spacing) are
    # re-rendered through the formula layer; unparseable text stays as is.
    try:
        return isabelle_formula(parse_inner_formula(text))
    except TheoryParseError:
        return text


def parse_proof_line(line: str) -> Optional[ProofStep]:
    """Parse one Isar proof line; None when it matches no step form.

    Parseable step goals are normalised to the canonical inner-syntax
    rendering, so parsing is idempotent over rendered proofs.
    """
    for kind, pattern in _PROOF_LINE_RES:
        match = pattern.match(line)
        if match is None:
            continue
        groups = match.groupdict()
        facts = tuple((groups.get("facts") or "").split())
        if kind is StepKind.FROM_ASM_HAVE and ASSUMPTION_NAME not in facts:
            facts = (ASSUMPTION_NAME,) + facts
        goal_text = groups.get("goal", "") or ""
        if goal_text:
            goal_text = _normalise_goal_text(goal_text)
        return ProofStep(
            kind=kind,
            goal_text=goal_text,
            facts_used=facts,
            tactic=groups["tactic"].strip(),
        )
    return None


_THEORY_NAME_RE = re.compile(r"^\s*theory\s+([A-Za-z][A-Za-z0-9_]*)", re.M)
_AXIOM_ENTRY_RE = re.compile(
    r"([A-Za-z][A-Za-z0-9_]*)\s*:\s*\"([^\"]*)\"", re.M
)
_ASSUMES_RE = re.compile(r"assumes\s+asm\s*:\s*\"([^\"]*)\"")
_SHOWS_RE = re.compile(r"shows\s+\"([^\"]*)\"")
_COMMENT_RE = re.compile(r"\(\*\s*(Explanation\s+\d+|Premise|Hypothesis)\s*:\s*(.*?)\s*\*\)")


def parse_theory(text: str) -> TheoryDoc:
    """Parse theory text in the rendered layout back into a TheoryDoc.

    The signature is re-inferred from the parsed formulas, so a consts
    block that fell out of sync with the axioms does not matter.  Raises
    TheoryParseError when the layout or any formula is malformed.
    """
    name_match = _THEORY_NAME_RE.search(text)
    if name_match is None:
        raise TheoryParseError("missing `theory <name>` header")
    name = name_match.group(1)

    theorem_at = text.find("theorem")
    if theorem_at < 0:
        raise TheoryParseError("missing theorem block")

    comments: Dict[str, str] = {}
    for match in _COMMENT_RE.finditer(text):
        key = match.group(1).lower().replace(" ", "")
        comments.setdefault(key, match.group(2))

    axioms: List[Axiom] = []
    head = text[:theorem_at]
    if "axiomatization" in head:
        block = head[head.index("axiomatization"):]
        for match in _AXIOM_ENTRY_RE.finditer(block):
            axiom_name, body = match.group(1), match.group(2)
            if not AXIOM_NAME_RE.match(axiom_name):
                raise TheoryParseError("unexpected axiom name %r" % axiom_name)
            formula = parse_inner_formula(body)
            free = free_variables(formula)
            if free:
                raise TheoryParseError(
                    "axiom %s has free variables %s"
                    % (axiom_name, sorted(v.name for v in free))
                )
            number = axiom_name.split("_")[-1]
            source = comments.get("explanation" + number, "")
            axioms.append(Axiom(axiom_name, formula, source))

    assumes = _ASSUMES_RE.search(text, theorem_at)
    shows = _SHOWS_RE.search(text, theorem_at)
    if assumes is None or shows is None:
        raise TheoryParseError("theorem block needs `assumes asm:` and `shows`")
    premise = parse_assumption(assumes.group(1))
    if premise is not None and has_quantifier(premise):
        raise TheoryParseError("premise assumption contains a quantifier")
    goal = parse_inner_formula(shows.group(1))
    if free_variables(goal):
        raise TheoryParseError("theorem goal has free variables")
    theorem = TheoremBlock(
        premise,
        goal,
        comments.get("premise", ""),
        comments.get("hypothesis", ""),
    )

    proof: List[ProofStep] = []
    body = text[theorem_at:]
    proof_match = re.search(r"^proof\s*-\s*$", body, re.M)
    if proof_match is not None:
        for line in body[proof_match.end():].split("\n"):
            if line.strip() == "qed":
                break
            if not line.strip():
                continue
            step = parse_proof_line(line)
            if step is None:
                raise TheoryParseError("unrecognised proof line: %r" % line.strip())
            proof.append(step)
        if not proof or proof[-1].kind is not StepKind.THEN_SHOW_THESIS:
            raise TheoryParseError("proof must close with `then show ?thesis`")
        known = {ASSUMPTION_NAME} | {a.name for a in axioms}
        for index, step in enumerate(proof):
            for fact in step.facts_used:
                if fact not in known:
                    raise TheoryParseError(
                        "proof step %d cites undeclared fact %r" % (index, fact)
                    )

    formulas = [a.formula for a in axioms]
    if premise is not None:
        formulas.append(premise)
    formulas.append(goal)
    try:
        signature = validate_signature(formulas)
    except (ArityError, ArityConflict) as exc:
        raise TheoryParseError(str(exc)) from exc

    try:
        return TheoryDoc(name, signature, tuple(axioms), theorem, tuple(proof))
    except TheoryError as exc:
        raise TheoryParseError(str(exc)) from exc
