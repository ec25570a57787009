"""Line protocol between the executor (server side, owns the world) and the
decision side (client).

Wire grammar, one LF-terminated ASCII line per message, no spaces:

* sensor line    ``D,X,Y,Obj``     D in [0,360) at 3 decimals, X/Y signed
                                   3 decimals, Obj 0 or 1
* look reply     ``true,FD`` / ``false,0.000``   FD in [0,360) at 3 decimals
* command line   ``none`` | ``looking_Qbo`` | ``search_Qbo(A)`` |
                 ``forward_Qbo(A)``             A in [0,360) at 3 decimals

The executor speaks first.  ``looking_Qbo`` is the only command answered with
a reply; every other command closes the cycle and the executor sends the next
sensor line.  Decoding tolerates CRLF and extra decimals and maps angles back
to the internal (-180, 180] form.
"""

from __future__ import annotations

import queue
import socket
from dataclasses import dataclass
from typing import Optional, Union

from .actions import ActionCommand, StuckError
from .geometry import normalize_angle
from .logic import Atom, Num, Term
from .sensors import LookOutcome, PerceptionRecord

DEFAULT_PORT = 5500
PORT_ENV_VAR = "RNAV_PORT"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class SensorLine:
    record: PerceptionRecord


@dataclass(frozen=True)
class LookReply:
    outcome: LookOutcome


@dataclass(frozen=True)
class CommandLine:
    command: ActionCommand


WireMessage = Union[SensorLine, LookReply, CommandLine]

_KIND = {SensorLine: "sensor", LookReply: "look", CommandLine: "command"}


def _wire_angle(a: float) -> str:
    """Angle as [0,360) with exactly 3 decimals."""
    if a != a or a in (float("inf"), float("-inf")):
        raise ProtocolError(f"non-finite angle: {a!r}")
    s = f"{a % 360.0:.3f}"
    return "0.000" if s == "360.000" else s


def _wire_signed(v: float) -> str:
    if v != v or v in (float("inf"), float("-inf")):
        raise ProtocolError(f"non-finite value: {v!r}")
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def encode(m: WireMessage) -> str:
    """One LF-terminated line."""
    if isinstance(m, SensorLine):
        r = m.record
        if r.obstacle_flag not in (0, 1):
            raise ProtocolError(f"obstacle flag must be 0 or 1: {r.obstacle_flag!r}")
        return (f"{_wire_angle(r.direction)},{_wire_signed(r.x)},"
                f"{_wire_signed(r.y)},{r.obstacle_flag}\n")
    if isinstance(m, LookReply):
        o = m.outcome
        if o.found:
            return f"true,{_wire_angle(o.bearing)}\n"
        return "false,0.000\n"
    if isinstance(m, CommandLine):
        c = m.command
        if c.kind == "none":
            return "none\n"
        if c.kind == "looking":
            return "looking_Qbo\n"
        return f"{c.kind}_Qbo({_wire_angle(c.direction)})\n"
    raise ProtocolError(f"not a wire message: {m!r}")


def _parse_float(field: str, line: str) -> float:
    try:
        return float(field)
    except ValueError:
        raise ProtocolError(f"bad number {field!r} in line: {line!r}") from None


def _classify(line: str) -> Optional[str]:
    parts = line.split(",")
    if len(parts) == 4:
        return "sensor"
    if len(parts) == 2 and parts[0] in ("true", "false"):
        return "look"
    if len(parts) == 1:
        word = parts[0]
        if word in ("none", "looking_Qbo") or (
                word.endswith(")") and word.split("(")[0] in ("search_Qbo", "forward_Qbo")):
            return "command"
    return None


def decode(line: str, expected: str) -> WireMessage:
    """Parse one line as the expected message kind ("sensor", "look",
    "command").  A well-formed line of another kind is a protocol-state
    error; anything else is a decode error."""
    raw = line.rstrip("\r\n")
    kind = _classify(raw)
    if kind is None:
        raise ProtocolError(f"cannot decode line: {raw!r}")
    if kind != expected:
        raise ProtocolError(f"expected a {expected} line, got a {kind} line: {raw!r}")

    if kind == "sensor":
        d, x, y, obj = raw.split(",")
        if obj not in ("0", "1"):
            raise ProtocolError(f"obstacle flag must be 0 or 1 in line: {raw!r}")
        return SensorLine(PerceptionRecord(
            direction=normalize_angle(_parse_float(d, raw)),
            x=_parse_float(x, raw), y=_parse_float(y, raw),
            obstacle_flag=int(obj)))
    if kind == "look":
        flag, fd = raw.split(",")
        bearing = normalize_angle(_parse_float(fd, raw))
        if flag == "true":
            return LookReply(LookOutcome(found=True, bearing=bearing))
        return LookReply(LookOutcome(found=False))
    word = raw
    if word == "none":
        return CommandLine(ActionCommand.none())
    if word == "looking_Qbo":
        return CommandLine(ActionCommand.looking())
    functor, arg = word[:-1].split("(", 1)
    direction = normalize_angle(_parse_float(arg, raw))
    if functor == "search_Qbo":
        return CommandLine(ActionCommand.search(direction))
    return CommandLine(ActionCommand.forward(direction))


def requantize(m: WireMessage) -> WireMessage:
    """The message as the far side will see it after one wire trip."""
    return decode(encode(m), _KIND[type(m)])


# ---------------------------------------------------------------------------
# Streams


class PipeStream:
    """One endpoint of an in-memory duplex line pipe."""

    def __init__(self, inbox: "queue.Queue[Optional[str]]",
                 outbox: "queue.Queue[Optional[str]]"):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def read_line(self) -> Optional[str]:
        line = self._inbox.get()
        if line is None:
            self._inbox.put(None)  # stay closed for any later read
        return line

    def write_line(self, line: str) -> None:
        if not self._closed:
            self._outbox.put(line)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def pipe_pair() -> tuple[PipeStream, PipeStream]:
    a_to_b: "queue.Queue[Optional[str]]" = queue.Queue()
    b_to_a: "queue.Queue[Optional[str]]" = queue.Queue()
    return PipeStream(b_to_a, a_to_b), PipeStream(a_to_b, b_to_a)


class SocketStream:
    """Blocking line I/O over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._reader = sock.makefile("r", encoding="ascii", newline="\n")

    def read_line(self) -> Optional[str]:
        try:
            line = self._reader.readline()
        except (OSError, ValueError):
            return None
        return line if line else None

    def write_line(self, line: str) -> None:
        try:
            self._sock.sendall(line.encode("ascii"))
        except OSError:
            pass  # peer gone; the next read reports it

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._reader.close()
        except OSError:
            pass
        self._sock.close()


# ---------------------------------------------------------------------------
# Session state machines


@dataclass
class SessionReport:
    reason: str
    cycles: int
    detail: str = ""


def run_executor_session(host, stream) -> SessionReport:
    """Serve one session: send a sensor line, execute commands as they come,
    answering ``looking_Qbo`` with a look reply, until the host reports a
    terminal condition or the peer goes away.

    ``host`` supplies the world side: poll() -> terminal reason or None,
    perception() -> PerceptionRecord, looking() -> LookOutcome,
    execute(ActionCommand) -> None.
    """
    cycles = 0
    try:
        while True:
            reason = host.poll()
            if reason is not None:
                return SessionReport(reason, cycles)
            stream.write_line(encode(SensorLine(host.perception())))
            while True:
                line = stream.read_line()
                if line is None:
                    return SessionReport("peer-closed", cycles)
                command = decode(line, "command").command
                if command.kind == "looking":
                    stream.write_line(encode(LookReply(host.looking())))
                    continue
                host.execute(command)
                cycles += 1
                break
    except ProtocolError as err:
        return SessionReport("protocol-error", cycles, detail=str(err))
    except StuckError as err:
        return SessionReport("stuck", cycles, detail=str(err))
    finally:
        stream.close()


def run_decision_client(state, stream) -> SessionReport:
    """Drive the decision side over a stream: read a sensor line, run one
    decision step (its looking exchange writes ``looking_Qbo`` and reads the
    reply), write the chosen command, repeat until the stream closes."""
    cycles = 0

    def send_command(args: list[Term]) -> Optional[list[Term]]:
        if args[1] != Atom("looking_Qbo"):
            raise ProtocolError(f"rules sent unexpected mid-cycle command: {args[1]!r}")
        stream.write_line(encode(CommandLine(ActionCommand.looking())))
        return args

    def recognize_target(args: list[Term]) -> Optional[list[Term]]:
        line = stream.read_line()
        if line is None:
            raise ProtocolError("stream closed during looking exchange")
        outcome = decode(line, "look").outcome
        return [Atom("true") if outcome.found else Atom("false"),
                Num(outcome.bearing if outcome.found else 0.0),
                args[2]]

    try:
        while True:
            line = stream.read_line()
            if line is None:
                return SessionReport("peer-closed", cycles)
            sensor = decode(line, "sensor").record
            command = state.step_with_externals(sensor, send_command, recognize_target)
            stream.write_line(encode(CommandLine(command)))
            cycles += 1
    except ProtocolError as err:
        return SessionReport("protocol-error", cycles, detail=str(err))
    finally:
        stream.close()
