"""First-order formulas over unary and binary predicates.

The formula language is deliberately small: predicate atoms over plain
variables, the usual connectives, and multi-variable quantifier blocks.
There are no function symbols and no equality.  Event verbs are treated
like any other predicate (an event variable plus Agent/Patient roles),
so nothing here is event-specific.

Concrete syntax (accepted on parse, the Unicode form is emitted):

    formula     := quantified | implication
    quantified  := ("∀" | "forall" | "∃" | "exists") vars "." formula
    implication := disjunct (("→" | "->") implication)?
    disjunct    := conjunct (("∨" | "|") disjunct)?
    conjunct    := negation (("∧" | "&") conjunct)?
    negation    := ("¬" | "~") negation | primary
    primary     := NAME "(" NAME ("," NAME)* ")" | "(" formula ")"
    vars        := NAME ("," ? NAME)*

Binary connectives associate to the right, matching the prover's inner
syntax so rendered conjunction chains stay flat in both syntaxes.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class LogicError(Exception):
    """Base class for errors raised by this module."""


class ParseError(LogicError):
    """Formula text rejected; carries the byte offset and expected tokens."""

    def __init__(self, message: str, offset: int, expected: Tuple[str, ...] = ()):
        self.message = message
        self.offset = offset
        self.expected = tuple(expected)
        detail = "%s at byte %d" % (message, offset)
        if self.expected:
            detail += " (expected %s)" % ", ".join(self.expected)
        super().__init__(detail)


class ArityError(LogicError):
    """A predicate name was used with two different argument counts."""

    def __init__(self, name: str, arities: Iterable[int]):
        self.name = name
        self.arities = tuple(sorted(set(arities)))
        super().__init__(
            "predicate %r used with arities %s" % (name, list(self.arities))
        )


class ArityConflict(LogicError):
    """Signature merge failure across several formulas."""

    def __init__(self, name: str, arities: Iterable[int], locations: Iterable[int]):
        self.name = name
        self.arities = tuple(sorted(set(arities)))
        self.locations = tuple(locations)
        super().__init__(
            "predicate %r has conflicting arities %s (formulas %s)"
            % (name, list(self.arities), list(self.locations))
        )


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __post_init__(self):
        if not IDENT_RE.match(self.name):
            raise ValueError("invalid variable name: %r" % self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    arity: int

    def __post_init__(self):
        if not IDENT_RE.match(self.name):
            raise ValueError("invalid predicate name: %r" % self.name)
        if self.arity < 1:
            raise ValueError("predicate arity must be >= 1: %s" % self.name)


class Formula:
    """Abstract base; use the concrete node classes below."""

    def __str__(self):
        return render_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    pred: PredicateSymbol
    args: Tuple[Variable, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) != self.pred.arity:
            raise ArityError(self.pred.name, (self.pred.arity, len(self.args)))


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


def _normalise_binder(node, vars_, body):
    # Same-kind nesting is flattened on construction so one multi-variable
    # binder is the only representation a prefix ever has.
    vars_ = tuple(vars_)
    while isinstance(body, type(node)):
        vars_ = vars_ + body.vars
        body = body.body
    if not vars_:
        raise ValueError("quantifier needs at least one variable")
    names = [v.name for v in vars_]
    if len(set(names)) != len(names):
        raise ValueError("duplicate variable in quantifier prefix: %s" % names)
    object.__setattr__(node, "vars", vars_)
    object.__setattr__(node, "body", body)


@dataclass(frozen=True)
class Forall(Formula):
    vars: Tuple[Variable, ...]
    body: Formula

    def __post_init__(self):
        _normalise_binder(self, self.vars, self.body)


@dataclass(frozen=True)
class Exists(Formula):
    vars: Tuple[Variable, ...]
    body: Formula

    def __post_init__(self):
        _normalise_binder(self, self.vars, self.body)


@dataclass(frozen=True)
class Signature:
    """Predicate symbols in first-appearance order, names unique."""

    predicates: Tuple[PredicateSymbol, ...]

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))
        seen: Dict[str, int] = {}
        for p in self.predicates:
            if p.name in seen and seen[p.name] != p.arity:
                raise ArityConflict(p.name, (seen[p.name], p.arity), ())
            seen[p.name] = p.arity

    def arity(self, name: str) -> Optional[int]:
        for p in self.predicates:
            if p.name == name:
                return p.arity
        return None

    def names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.predicates)


# ---------------------------------------------------------------------------
# Tokeniser / parser

_SYMBOL_TOKENS = [
    ("∀", "FORALL"),
    ("∃", "EXISTS"),
    ("¬", "NOT"),
    ("∧", "AND"),
    ("∨", "OR"),
    ("→", "IMPLIES"),
    ("->", "IMPLIES"),
    ("~", "NOT"),
    ("&", "AND"),
    ("|", "OR"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    (".", "DOT"),
    (",", "COMMA"),
]

_KEYWORD_TOKENS = {"forall": "FORALL", "exists": "EXISTS"}

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int  # character offset into the source


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        word = _WORD_RE.match(text, i)
        if word:
            name = word.group(0)
            kind = _KEYWORD_TOKENS.get(name, "IDENT")
            tokens.append(_Token(kind, name, i))
            i = word.end()
            continue
        for sym, kind in _SYMBOL_TOKENS:
            if text.startswith(sym, i):
                tokens.append(_Token(kind, sym, i))
                i += len(sym)
                break
        else:
            raise ParseError(
                "unexpected character %r" % ch, _byte_offset(text, i)
            )
    tokens.append(_Token("END", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, expected: Tuple[str, ...] = ()):
        tok = self.peek()
        raise ParseError(message, _byte_offset(self.text, tok.pos), expected)

    def expect(self, kind: str, what: str) -> _Token:
        if self.peek().kind != kind:
            self.fail("expected %s" % what, (what,))
        return self.advance()

    def parse(self) -> Formula:
        f = self.formula()
        if self.peek().kind != "END":
            self.fail("trailing input after formula", ("end of input",))
        return f

    def formula(self) -> Formula:
        kind = self.peek().kind
        if kind in ("FORALL", "EXISTS"):
            opener = self.advance()
            vars_ = self.varlist(opener)
            self.expect("DOT", "'.'")
            body = self.formula()
            cls = Forall if opener.kind == "FORALL" else Exists
            try:
                return cls(tuple(vars_), body)
            except ValueError as exc:
                raise ParseError(
                    str(exc), _byte_offset(self.text, opener.pos)
                ) from exc
        return self.implication()

    def varlist(self, opener: _Token) -> List[Variable]:
        vars_ = []
        while True:
            if self.peek().kind != "IDENT":
                if vars_:
                    break
                self.fail("expected bound variable", ("variable name",))
            vars_.append(Variable(self.advance().text))
            if self.peek().kind == "COMMA":
                self.advance()
        return vars_

    def implication(self) -> Formula:
        left = self.disjunct()
        if self.peek().kind == "IMPLIES":
            self.advance()
            return Implies(left, self.implication())
        return left

    def disjunct(self) -> Formula:
        left = self.conjunct()
        if self.peek().kind == "OR":
            self.advance()
            return Or(left, self.disjunct())
        return left

    def conjunct(self) -> Formula:
        left = self.negation()
        if self.peek().kind == "AND":
            self.advance()
            return And(left, self.conjunct())
        return left

    def negation(self) -> Formula:
        if self.peek().kind == "NOT":
            self.advance()
            return Not(self.negation())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.advance()
            inner = self.formula()
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind == "IDENT":
            name = self.advance().text
            self.expect("LPAREN", "'('")
            args = [Variable(self.expect("IDENT", "argument name").text)]
            while self.peek().kind == "COMMA":
                self.advance()
                args.append(Variable(self.expect("IDENT", "argument name").text))
            self.expect("RPAREN", "')'")
            return Atom(PredicateSymbol(name, len(args)), tuple(args))
        self.fail(
            "expected a formula", ("predicate atom", "quantifier", "'('", "'¬'")
        )


def parse_formula(text: str) -> Formula:
    """Parse canonical formula text.

    Raises ParseError (with a byte offset into the UTF-8 encoding of the
    input and the set of expected tokens) on malformed text, and
    ArityError when one predicate name occurs with two argument counts.
    """
    formula = _Parser(text).parse()
    _check_arities(formula)
    return formula


def _check_arities(formula: Formula):
    seen: Dict[str, int] = {}
    for atom in iter_atoms(formula):
        prev = seen.get(atom.pred.name)
        if prev is not None and prev != atom.pred.arity:
            raise ArityError(atom.pred.name, (prev, atom.pred.arity))
        seen[atom.pred.name] = atom.pred.arity


def iter_atoms(formula: Formula) -> Iterable[Atom]:
    if isinstance(formula, Atom):
        yield formula
    elif isinstance(formula, Not):
        yield from iter_atoms(formula.child)
    elif isinstance(formula, (And, Or, Implies)):
        yield from iter_atoms(formula.left)
        yield from iter_atoms(formula.right)
    elif isinstance(formula, (Forall, Exists)):
        yield from iter_atoms(formula.body)
    else:
        raise TypeError("not a formula: %r" % (formula,))


# ---------------------------------------------------------------------------
# Rendering

# Precedence levels, loosest first.  A child is parenthesised when its own
# level is below the level its position requires.
_LEVEL_QUANT = 0
_LEVEL_IMPLIES = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_NOT = 4
_LEVEL_ATOM = 5


def _level(f: Formula) -> int:
    if isinstance(f, (Forall, Exists)):
        return _LEVEL_QUANT
    if isinstance(f, Implies):
        return _LEVEL_IMPLIES
    if isinstance(f, Or):
        return _LEVEL_OR
    if isinstance(f, And):
        return _LEVEL_AND
    if isinstance(f, Not):
        return _LEVEL_NOT
    return _LEVEL_ATOM


def _render(f: Formula, need: int) -> str:
    if isinstance(f, Atom):
        return "%s(%s)" % (f.pred.name, ", ".join(v.name for v in f.args))
    if isinstance(f, Not):
        text = "¬" + _render(f.child, _LEVEL_NOT)
    elif isinstance(f, And):
        text = "%s ∧ %s" % (
            _render(f.left, _LEVEL_AND + 1),
            _render(f.right, _LEVEL_AND),
        )
    elif isinstance(f, Or):
        text = "%s ∨ %s" % (
            _render(f.left, _LEVEL_OR + 1),
            _render(f.right, _LEVEL_OR),
        )
    elif isinstance(f, Implies):
        text = "%s → %s" % (
            _render(f.left, _LEVEL_IMPLIES + 1),
            _render(f.right, _LEVEL_IMPLIES),
        )
    elif isinstance(f, (Forall, Exists)):
        mark = "∀" if isinstance(f, Forall) else "∃"
        text = "%s%s. %s" % (
            mark,
            " ".join(v.name for v in f.vars),
            _render(f.body, _LEVEL_QUANT),
        )
    else:
        raise TypeError("not a formula: %r" % (f,))
    if _level(f) < need:
        return "(%s)" % text
    return text


def render_formula(f: Formula) -> str:
    """Deterministic canonical text; parse_formula inverts it exactly."""
    return _render(f, _LEVEL_QUANT)


# ---------------------------------------------------------------------------
# Analysis helpers

def free_variables(f: Formula) -> Set[Variable]:
    if isinstance(f, Atom):
        return set(f.args)
    if isinstance(f, Not):
        return free_variables(f.child)
    if isinstance(f, (And, Or, Implies)):
        return free_variables(f.left) | free_variables(f.right)
    if isinstance(f, (Forall, Exists)):
        return free_variables(f.body) - set(f.vars)
    raise TypeError("not a formula: %r" % (f,))


def is_closed(f: Formula) -> bool:
    return not free_variables(f)


def has_quantifier(f: Formula) -> bool:
    if isinstance(f, (Forall, Exists)):
        return True
    if isinstance(f, Not):
        return has_quantifier(f.child)
    if isinstance(f, (And, Or, Implies)):
        return has_quantifier(f.left) or has_quantifier(f.right)
    return False


def validate_signature(formulas: Sequence[Formula]) -> Signature:
    """Merge the predicates of several formulas into one signature.

    Predicates keep first-appearance order.  A name seen with two arities
    raises ArityConflict carrying the formula indices involved.
    """
    order: List[PredicateSymbol] = []
    arities: Dict[str, int] = {}
    locations: Dict[str, List[int]] = {}
    for idx, formula in enumerate(formulas):
        for atom in iter_atoms(formula):
            name = atom.pred.name
            locs = locations.setdefault(name, [])
            if idx not in locs:
                locs.append(idx)
            prev = arities.get(name)
            if prev is None:
                arities[name] = atom.pred.arity
                order.append(atom.pred)
            elif prev != atom.pred.arity:
                raise ArityConflict(name, (prev, atom.pred.arity), locs)
    return Signature(tuple(order))


def sanitize_name(raw: str, taken: Iterable[str] = ()) -> str:
    """Coerce arbitrary text to the identifier charset.

    Runs of non-identifier characters become a single underscore; a name
    that would not start with a letter gets a "P" prefix.  Names already
    in `taken` are disambiguated with _2, _3, ... suffixes.
    """
    cleaned = re.sub(r"[^A-Za-z0-9_]+", "_", raw.strip()).strip("_")
    if not cleaned:
        cleaned = "P"
    if not cleaned[0].isalpha():
        cleaned = "P_" + cleaned
    taken = set(taken)
    if cleaned not in taken:
        return cleaned
    n = 2
    while "%s_%d" % (cleaned, n) in taken:
        n += 1
    return "%s_%d" % (cleaned, n)
