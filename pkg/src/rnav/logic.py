"""Micro ordered-clause logic interpreter.

Terms are atoms, numbers, variables and compounds.  Resolution is SLD-style:
depth-first, leftmost goal first, clauses tried in source order, with cut
committing to the clause it appears in.  There is no occurs-check, matching
common practice; unification of cyclic terms is therefore unsound, but the
shipped decision program never builds one.

Builtins: ``=``/2, ``true``/0, ``assert``/1 (append a fact to the dynamic
database) and ``retract``/1 (remove the first matching fact, fail if none).
Everything else must come from clauses or from host-registered external
predicates, which are the engine's only I/O channel: an external receives the
goal's argument terms (current bindings applied) and returns replacement
terms to unify back, or None for failure.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union


class EngineError(Exception):
    pass


class ParseError(EngineError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ExistenceError(EngineError):
    pass


class DepthLimitError(EngineError):
    pass


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Struct:
    functor: str
    args: tuple["Term", ...]


Term = Union[Atom, Num, Var, Struct]

CUT = Atom("!")

Substitution = dict[str, Term]
External = Callable[[list[Term]], Optional[list[Term]]]


def term_str(t: Term) -> str:
    if isinstance(t, Atom):
        return t.name
    if isinstance(t, Num):
        v = t.value
        return str(int(v)) if v == int(v) else repr(v)
    if isinstance(t, Var):
        return t.name
    return f"{t.functor}({','.join(term_str(a) for a in t.args)})"


def indicator(t: Term) -> tuple[str, int]:
    """(functor, arity) of a callable term."""
    if isinstance(t, Atom):
        return t.name, 0
    if isinstance(t, Struct):
        return t.functor, len(t.args)
    raise EngineError(f"not a callable term: {term_str(t)}")


def walk(t: Term, s: Substitution) -> Term:
    """Chase variable bindings to the representative term."""
    while isinstance(t, Var):
        bound = s.get(t.name)
        if bound is None:
            return t
        t = bound
    return t


def unify(t1: Term, t2: Term, s: Substitution) -> Optional[Substitution]:
    """Most general unifier extending s, or None.  No occurs-check."""
    t1 = walk(t1, s)
    t2 = walk(t2, s)
    if isinstance(t1, Var):
        if isinstance(t2, Var) and t1.name == t2.name:
            return s
        out = dict(s)
        out[t1.name] = t2
        return out
    if isinstance(t2, Var):
        out = dict(s)
        out[t2.name] = t1
        return out
    if isinstance(t1, Atom) and isinstance(t2, Atom):
        return s if t1.name == t2.name else None
    if isinstance(t1, Num) and isinstance(t2, Num):
        return s if t1.value == t2.value else None
    if isinstance(t1, Struct) and isinstance(t2, Struct):
        if t1.functor != t2.functor or len(t1.args) != len(t2.args):
            return None
        for a, b in zip(t1.args, t2.args):
            s = unify(a, b, s)
            if s is None:
                return None
        return s
    return None


def apply_subst(s: Substitution, t: Term) -> Term:
    """Replace bound variables transitively; unbound ones stay."""
    t = walk(t, s)
    if isinstance(t, Struct):
        return Struct(t.functor, tuple(apply_subst(s, a) for a in t.args))
    return t


def variables(t: Term) -> list[str]:
    """Variable names occurring in t, first occurrence order."""
    seen: list[str] = []

    def go(u: Term) -> None:
        if isinstance(u, Var):
            if u.name not in seen:
                seen.append(u.name)
        elif isinstance(u, Struct):
            for a in u.args:
                go(a)

    go(t)
    return seen


# ---------------------------------------------------------------------------
# Clauses and programs


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple[Term, ...]

    def key(self) -> tuple[str, int]:
        return indicator(self.head)


@dataclass
class Program:
    """Ordered static clauses plus a mutable fact database."""

    clauses: list[Clause] = field(default_factory=list)
    dynamic_db: dict[tuple[str, int], list[Term]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._index: dict[tuple[str, int], list[Clause]] = {}
        for c in self.clauses:
            self._index.setdefault(c.key(), []).append(c)

    def clauses_for(self, key: tuple[str, int]) -> Optional[list[Clause]]:
        return self._index.get(key)

    def assert_fact(self, fact: Term) -> None:
        self.dynamic_db.setdefault(indicator(fact), []).append(fact)

    def retract_fact(self, pattern: Term, s: Substitution) -> Optional[Substitution]:
        """Remove the first dynamic fact unifying with pattern; None if none."""
        facts = self.dynamic_db.get(indicator(pattern))
        if not facts:
            return None
        for i, fact in enumerate(facts):
            s2 = unify(pattern, fact, s)
            if s2 is not None:
                del facts[i]
                return s2
        return None

    def dynamic_facts(self, key: tuple[str, int]) -> Optional[list[Term]]:
        return self.dynamic_db.get(key)


# ---------------------------------------------------------------------------
# Parser

_PUNCT = {"(", ")", ",", ".", "!", "=", ":-"}


@dataclass(frozen=True)
class _Token:
    kind: str  # atom | var | num | punct | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == ":" and i + 1 < n and text[i + 1] == "-":
            tokens.append(_Token("punct", ":-", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in "(),.!=":
            tokens.append(_Token("punct", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot
                                                   and j + 1 < n and text[j + 1].isdigit())):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(_Token("num", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "var" if (ch == "_" or ch.isupper()) else "atom"
            tokens.append(_Token(kind, word, start_line, start_col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.anon = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind == "eof":
            raise ParseError(f"expected {text!r} but hit end of input", tok.line, tok.col)
        if tok.text != text:
            raise ParseError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def fail(self, msg: str) -> ParseError:
        tok = self.peek()
        where = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{msg}, got {where}", tok.line, tok.col)

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "var":
            if tok.text == "_":
                self.anon += 1
                return Var(f"_G{self.anon}")
            return Var(tok.text)
        if tok.kind == "atom":
            if self.peek().text == "(":
                self.next()
                args = [self.term()]
                while self.peek().text == ",":
                    self.next()
                    args.append(self.term())
                self.expect(")")
                return Struct(tok.text, tuple(args))
            return Atom(tok.text)
        self.pos -= 1
        raise self.fail("expected a term")

    def goal(self) -> Term:
        if self.peek().text == "!":
            self.next()
            return CUT
        left = self.term()
        if self.peek().text == "=":
            self.next()
            right = self.term()
            return Struct("=", (left, right))
        if isinstance(left, (Var, Num)):
            self.pos -= 1
            raise self.fail("goal must be an atom or compound")
        return left

    def clause(self) -> Clause:
        head = self.term()
        if not isinstance(head, (Atom, Struct)) or head == CUT:
            raise self.fail("clause head must be an atom or compound")
        tok = self.next()
        if tok.text == ".":
            return Clause(head, ())
        if tok.text != ":-":
            self.pos -= 1
            raise self.fail("expected '.' or ':-' after clause head")
        body = [self.goal()]
        while True:
            tok = self.next()
            if tok.text == ".":
                break
            if tok.text != ",":
                self.pos -= 1
                raise self.fail("expected ',' or '.' in clause body")
            body.append(self.goal())
        return Clause(head, tuple(body))

    def program(self) -> Program:
        clauses = []
        while self.peek().kind != "eof":
            clauses.append(self.clause())
        return Program(clauses=clauses)


def parse_program(text: str) -> Program:
    """Parse rule-file text into a Program, clauses in source order."""
    return _Parser(text).program()


def parse_term(text: str) -> Term:
    """Parse a single term (handy for tests and goal construction)."""
    p = _Parser(text)
    t = p.term()
    if p.peek().kind != "eof":
        raise p.fail("trailing input after term")
    return t


# ---------------------------------------------------------------------------
# Resolution


class _CutBarrier:
    __slots__ = ("fired",)

    def __init__(self) -> None:
        self.fired = False


class _Search:
    def __init__(self, program: Program, externals: dict[tuple[str, int], External],
                 max_depth: int, stats: Optional[dict]):
        self.program = program
        self.externals = externals
        self.max_depth = max_depth
        self.stats = stats if stats is not None else None
        if stats is not None and "clause_trials" not in stats:
            stats["clause_trials"] = Counter()
        self.rename_count = 0

    def rename(self, clause: Clause) -> tuple[Term, tuple[Term, ...]]:
        self.rename_count += 1
        tag = self.rename_count
        mapping: dict[str, Var] = {}

        def go(t: Term) -> Term:
            if isinstance(t, Var):
                fresh = mapping.get(t.name)
                if fresh is None:
                    fresh = Var(f"{t.name}@{tag}")
                    mapping[t.name] = fresh
                return fresh
            if isinstance(t, Struct):
                return Struct(t.functor, tuple(go(a) for a in t.args))
            return t

        return go(clause.head), tuple(go(g) for g in clause.body)

    def body(self, goals: tuple[Term, ...], s: Substitution, depth: int,
             barrier: _CutBarrier) -> Iterator[Substitution]:
        if not goals:
            yield s
            return
        goal, rest = goals[0], goals[1:]
        if goal == CUT:
            barrier.fired = True
            yield from self.body(rest, s, depth, barrier)
            return
        for s2 in self.goal(goal, s, depth):
            yield from self.body(rest, s2, depth, barrier)
            if barrier.fired:
                return

    def goal(self, goal: Term, s: Substitution, depth: int) -> Iterator[Substitution]:
        goal = walk(goal, s)
        if not isinstance(goal, (Atom, Struct)):
            raise ExistenceError(f"goal is not callable: {term_str(goal)}")
        key = indicator(goal)
        args = goal.args if isinstance(goal, Struct) else ()

        if key == ("true", 0):
            yield s
            return
        if key == ("=", 2):
            s2 = unify(args[0], args[1], s)
            if s2 is not None:
                yield s2
            return
        if key == ("assert", 1):
            self.program.assert_fact(apply_subst(s, args[0]))
            yield s
            return
        if key == ("retract", 1):
            s2 = self.program.retract_fact(args[0], s)
            if s2 is not None:
                yield s2
            return
        if key in self.externals:
            call_args = [apply_subst(s, a) for a in args]
            result = self.externals[key](call_args)
            if result is None:
                return
            if len(result) != len(args):
                raise EngineError(f"external {key[0]}/{key[1]} returned "
                                  f"{len(result)} terms for {len(args)} args")
            s2: Optional[Substitution] = s
            for a, r in zip(args, result):
                s2 = unify(a, r, s2)
                if s2 is None:
                    return
            yield s2
            return

        clauses = self.program.clauses_for(key)
        facts = self.program.dynamic_facts(key)
        if clauses is None and facts is None:
            raise ExistenceError(f"unknown predicate {key[0]}/{key[1]}")
        if depth >= self.max_depth:
            raise DepthLimitError(f"depth limit {self.max_depth} exceeded at "
                                  f"{key[0]}/{key[1]}")
        barrier = _CutBarrier()
        for clause in clauses or ():
            if self.stats is not None:
                self.stats["clause_trials"][key] += 1
            head, body = self.rename(clause)
            s2 = unify(goal, head, s)
            if s2 is None:
                continue
            yield from self.body(body, s2, depth + 1, barrier)
            if barrier.fired:
                return
        # facts asserted at runtime, tried after any static clauses
        for fact in list(facts or ()):
            if self.stats is not None:
                self.stats["clause_trials"][key] += 1
            renamed = self.rename(Clause(fact, ()))[0]
            s2 = unify(goal, renamed, s)
            if s2 is not None:
                yield s2


def solutions(program: Program, goal: Term,
              externals: Optional[dict[tuple[str, int], External]] = None,
              max_depth: int = 10000,
              stats: Optional[dict] = None) -> Iterator[Substitution]:
    """All solutions, lazily, each projected onto the goal's variables."""
    search = _Search(program, externals or {}, max_depth, stats)
    names = variables(goal)
    for s in search.goal(goal, {}, 0):
        yield {name: apply_subst(s, Var(name)) for name in names}


def solve(program: Program, goal: Term,
          externals: Optional[dict[tuple[str, int], External]] = None,
          max_depth: int = 10000,
          stats: Optional[dict] = None) -> Optional[Substitution]:
    """First solution, or None."""
    for s in solutions(program, goal, externals, max_depth, stats):
        return s
    return None
