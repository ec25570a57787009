"""Per-cycle action selection.

Two interchangeable backends produce the next command from the latest sensor
line: the shipped rule file run through the logic engine (the primary path)
and a directly-coded equivalent kept as a cross-check.  Both share the same
contract: the first cycle records the starting pose and returns ``none``;
afterwards the robot looks for the target and picks forward or search from
the (found, obstacle) pair, falling back on the remembered initial direction
whenever the target is not in sight.
"""

from __future__ import annotations

from importlib import resources
from typing import Callable, Optional

from .actions import ActionCommand
from .geometry import normalize_angle
from .logic import (Atom, Num, Program, Struct, Term, Var, parse_program, solve,
                    term_str)
from .sensors import LookOutcome, PerceptionRecord


class DecisionError(RuntimeError):
    pass


LookExchange = Callable[[], LookOutcome]


def decide_action(found: bool, found_dir: float, initial_dir: float, obj: int) -> ActionCommand:
    """The branch table: aim at the target when seen, otherwise at the
    initial direction; search instead of forward when the way is blocked."""
    direction = normalize_angle(found_dir if found else initial_dir)
    if obj == 1:
        return ActionCommand.search(direction)
    return ActionCommand.forward(direction)


def builtin_program() -> str:
    """Text of the shipped rule file."""
    return resources.files("rnav.rules").joinpath("search_target.pl").read_text("utf-8")


def _command_from_term(t: Term) -> ActionCommand:
    if t == Atom("none"):
        return ActionCommand.none()
    if isinstance(t, Struct) and len(t.args) == 1 and isinstance(t.args[0], Num):
        if t.functor == "search_Qbo":
            return ActionCommand.search(t.args[0].value)
        if t.functor == "forward_Qbo":
            return ActionCommand.forward(t.args[0].value)
    raise DecisionError(f"rule file produced an unusable operator: {term_str(t)}")


class DecisionState:
    """One session of the decision side.

    backend "rules" drives the rule file through the logic engine; backend
    "direct" uses the plain-Python equivalent.  ``log`` receives the progress
    atoms the rules emit (target_found / target_not_found).
    """

    def __init__(self, rules_text: Optional[str] = None, backend: str = "rules",
                 log: Optional[Callable[[str], None]] = None):
        if backend not in ("rules", "direct"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.cycle_count = 0
        self.log_messages: list[str] = []
        self._log_sink = log
        self._initial: Optional[tuple[float, float, float]] = None  # direct backend
        self.program = parse_program(rules_text if rules_text is not None else builtin_program())
        self.program.assert_fact(Atom("first"))

    # -- observation helpers -------------------------------------------------

    @property
    def initial_state(self) -> Optional[tuple[float, float, float]]:
        """(D, X, Y) recorded on the first cycle, or None before it."""
        if self.backend == "direct":
            return self._initial
        facts = self.program.dynamic_facts(("initial_state", 3))
        if not facts:
            return None
        args = facts[0].args
        return tuple(a.value for a in args)  # type: ignore[union-attr]

    def _log(self, message: str) -> None:
        self.log_messages.append(message)
        if self._log_sink is not None:
            self._log_sink(message)

    # -- the cycle ------------------------------------------------------------

    def step(self, perception: PerceptionRecord, look: LookExchange) -> ActionCommand:
        """Run one decision cycle.  ``look`` performs the looking exchange
        with the executor; it is never invoked on the first cycle."""

        def send_command(args: list[Term]) -> Optional[list[Term]]:
            return args  # the look exchange below does the actual I/O

        def recognize_target(args: list[Term]) -> Optional[list[Term]]:
            outcome = look()
            return [Atom("true") if outcome.found else Atom("false"),
                    Num(outcome.bearing if outcome.found else 0.0),
                    args[2]]

        return self.step_with_externals(perception, send_command, recognize_target)

    def step_with_externals(self, perception: PerceptionRecord,
                            send_command, recognize_target) -> ActionCommand:
        """Like step, but with the two looking-exchange host predicates given
        explicitly; the protocol client wires them to its stream."""
        if self.backend == "direct":
            command = self._direct_step(perception, send_command, recognize_target)
        else:
            command = self._rules_step(perception, send_command, recognize_target)
        self.cycle_count += 1
        return command

    def _rules_step(self, p: PerceptionRecord, send_command, recognize_target) -> ActionCommand:
        externals = {
            ("send_command", 2): send_command,
            ("recognize_target", 3): recognize_target,
            ("log", 1): self._log_external,
        }
        goal = Struct("search_target", (
            Num(p.direction), Num(p.x), Num(p.y),
            Var("Op"), Num(float(p.obstacle_flag)),
            Atom("input"), Atom("output")))
        result = solve(self.program, goal, externals=externals)
        if result is None:
            raise DecisionError("decision rules failed to produce an operator")
        return _command_from_term(result["Op"])

    def _log_external(self, args: list[Term]) -> Optional[list[Term]]:
        self._log(term_str(args[0]))
        return args

    def _direct_step(self, p: PerceptionRecord, send_command, recognize_target) -> ActionCommand:
        if self._initial is None:
            self._initial = (p.direction, p.x, p.y)
            return ActionCommand.none()
        send_command([Atom("output"), Atom("looking_Qbo")])
        reply = recognize_target([Var("F"), Var("FD"), Atom("input")])
        if reply is None:
            raise DecisionError("looking exchange failed")
        found = reply[0] == Atom("true")
        found_dir = reply[1].value  # type: ignore[union-attr]
        self._log("target_found" if found else "target_not_found")
        return decide_action(found, found_dir, self._initial[0], p.obstacle_flag)
