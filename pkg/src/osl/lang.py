"""Command language: AST, parser, printer, desugaring and modified-variable sets."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


class ProgramError(Exception):
    """Semantic problem with a parsed program (unknown proc, arity, cycles)."""


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class LVar:
    """Logical variable. Only assertions mention these; programs never do."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: Union[int, Fraction]

    def __str__(self) -> str:
        return fmt_number(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Not:
    arg: "Expr"

    def __str__(self) -> str:
        a = self.arg
        if isinstance(a, BinOp) and a.op == "=":
            return f"({a.left} != {a.right})"
        return f"!{a}" if isinstance(a, (Var, Const, LVar, BinOp, Not)) else f"!({a})"


Expr = Union[Var, LVar, Const, BinOp, Not]
BINOPS = ("+", "-", "=", "<=", "&&")
NULL = Const(0)
TRUE = Const(1)
FALSE = Const(0)


def fmt_number(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        d = v.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        if d == 1:
            k = max(twos, fives)
            n = abs(v.numerator) * 10 ** k // v.denominator
            digits = str(n).rjust(k + 1, "0")
            sign = "-" if v < 0 else ""
            return f"{sign}{digits[:-k]}.{digits[-k:]}"
        return f"{v.numerator}/{v.denominator}"
    return str(v)


def neq(a: Expr, b: Expr) -> Not:
    return Not(BinOp("=", a, b))


def expr_vars(e: Expr) -> Set[str]:
    """Program variables mentioned by e."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Not):
        return expr_vars(e.arg)
    return set()


# ------------------------------------------------------------------- commands


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Seq:
    first: "Command"
    second: "Command"


@dataclass(frozen=True)
class Choice:
    left: "Command"
    right: "Command"


@dataclass(frozen=True)
class Assume:
    cond: Expr


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Command"


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Command"
    orelse: "Command"


@dataclass(frozen=True)
class PChoice:
    prob: Fraction
    left: "Command"
    right: "Command"


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class Alloc:
    var: str


@dataclass(frozen=True)
class Malloc:
    var: str


@dataclass(frozen=True)
class Free:
    addr: Expr


@dataclass(frozen=True)
class Store:
    addr: Expr
    value: Expr


@dataclass(frozen=True)
class Load:
    var: str
    addr: Expr


@dataclass(frozen=True)
class Error:
    pass


@dataclass(frozen=True)
class Call:
    proc: str
    args: Tuple[Expr, ...]


Command = Union[Skip, Seq, Choice, Assume, While, If, PChoice, Assign, Alloc, Malloc,
                Free, Store, Load, Error, Call]
ACTIONS = (Assign, Alloc, Malloc, Free, Store, Load, Error, Call)


def seq(*cs: Command) -> Command:
    cs = [c for c in cs]
    if not cs:
        return Skip()
    out = cs[-1]
    for c in reversed(cs[:-1]):
        out = Seq(c, out)
    return out


@dataclass(frozen=True)
class Proc:
    name: str
    params: Tuple[str, ...]
    body: Command


@dataclass
class Program:
    procs: Dict[str, Proc]
    entry: str = "main"

    def __getitem__(self, name: str) -> Proc:
        return self.procs[name]

    def call_graph(self) -> Dict[str, Set[str]]:
        return {n: set(called_procs(p.body)) for n, p in self.procs.items()}

    def topo_order(self) -> List[str]:
        """Callees before callers; raises ProgramError on a cycle."""
        graph = self.call_graph()
        order: List[str] = []
        state: Dict[str, int] = {}

        def visit(n: str, path: List[str]) -> None:
            if state.get(n) == 2:
                return
            if state.get(n) == 1:
                raise ProgramError("cyclic call graph: " + " -> ".join(path + [n]))
            state[n] = 1
            for m in sorted(graph[n]):
                visit(m, path + [n])
            state[n] = 2
            order.append(n)

        for n in sorted(graph):
            visit(n, [])
        return order


def called_procs(c: Command) -> Iterator[str]:
    if isinstance(c, Call):
        yield c.proc
    for sub in subcommands(c):
        yield from called_procs(sub)


def subcommands(c: Command) -> Tuple[Command, ...]:
    if isinstance(c, (Seq,)):
        return (c.first, c.second)
    if isinstance(c, (Choice, PChoice)):
        return (c.left, c.right)
    if isinstance(c, While):
        return (c.body,)
    if isinstance(c, If):
        return (c.then, c.orelse)
    return ()


def mod(c: Command, program: Optional[Program] = None) -> Set[str]:
    """Variables possibly written by c, including callee bodies and rebound formals."""
    out: Set[str] = set()
    seen: Set[str] = set()

    def go(c: Command) -> None:
        if isinstance(c, (Assign, Alloc, Malloc, Load)):
            out.add(c.var)
        elif isinstance(c, Call):
            if program is None or c.proc not in program.procs:
                raise ProgramError(f"mod of call to unknown procedure {c.proc}")
            p = program.procs[c.proc]
            # Binding a formal to the same-named variable writes nothing new.
            out.update(x for x, e in zip(p.params, c.args) if e != Var(x))
            if c.proc in seen:
                return
            seen.add(c.proc)
            go(p.body)
        for sub in subcommands(c):
            go(sub)

    go(c)
    return out


# ------------------------------------------------------------------- desugar


def desugar(c: Command) -> Command:
    if isinstance(c, If):
        cond = c.cond
        return Choice(Seq(Assume(cond), desugar(c.then)),
                      Seq(Assume(Not(cond)), desugar(c.orelse)))
    if isinstance(c, PChoice):
        p = Fraction(c.prob)
        if not 0 <= p <= 1:
            raise ValueError(f"probability {p} outside [0,1]")
        return Choice(Seq(Assume(Const(p)), desugar(c.left)),
                      Seq(Assume(Const(1 - p)), desugar(c.right)))
    if isinstance(c, Malloc):
        return Choice(Alloc(c.var), Assign(c.var, NULL))
    if isinstance(c, Seq):
        return Seq(desugar(c.first), desugar(c.second))
    if isinstance(c, Choice):
        return Choice(desugar(c.left), desugar(c.right))
    if isinstance(c, While):
        return While(c.cond, desugar(c.body))
    return c


def desugar_program(p: Program) -> Program:
    return Program({n: Proc(n, q.params, desugar(q.body)) for n, q in p.procs.items()}, p.entry)


def is_core(c: Command) -> bool:
    if isinstance(c, (If, PChoice, Malloc)):
        return False
    return all(is_core(s) for s in subcommands(c))


# --------------------------------------------------------------------- lexer

KEYWORDS = {"skip", "assume", "while", "if", "else", "alloc", "malloc", "free",
            "error", "proc", "true", "false", "null"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+(\.\d+)?(/\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9']*)
  | (?P<op>:=|<-|!\|->|\|->|!=|<=|&&|\|\||\\/|/\\|\(\+\)_|\(\+\)|\+\[|[-+*=!()\[\]{};,:_^.|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    toks: List[Token] = []
    pos, line, col0 = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        tx = m.group()
        if kind == "nl":
            toks.append(Token("nl", tx, line, pos - col0 + 1))
            line += 1
            col0 = pos + 1
        elif kind == "id" and tx == "_":
            toks.append(Token("op", tx, line, pos - col0 + 1))
        elif kind not in ("ws", "comment"):
            toks.append(Token(kind, tx, line, pos - col0 + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - col0 + 1))
    return toks


def parse_number(tx: str) -> Union[int, Fraction]:
    if "/" in tx:
        n, d = tx.split("/")
        return Fraction(Fraction(n), int(d))
    if "." in tx:
        return Fraction(tx)
    return int(tx)


class TokenStream:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("op", "id") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def skip_nl(self) -> None:
        while self.peek().kind == "nl":
            self.i += 1

    def peek_past_nl(self) -> Token:
        k = 0
        while self.peek(k).kind == "nl":
            k += 1
        return self.peek(k)

    def error(self, msg: str):
        t = self.peek()
        found = t.text if t.kind != "eof" else "end of input"
        raise ParseError(f"{msg}, found {found!r}", t.line, t.col)

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "id" or t.text in KEYWORDS:
            self.error("expected identifier")
        self.i += 1
        return t.text


# ------------------------------------------------------------ expression parser


def parse_expr_tokens(ts: TokenStream, lvars: bool = False) -> Expr:
    return _conj(ts, lvars)


def _conj(ts, lv):
    e = _cmp(ts, lv)
    while ts.accept("&&"):
        e = BinOp("&&", e, _cmp(ts, lv))
    return e


def _cmp(ts, lv):
    e = _add(ts, lv)
    if ts.accept("=") or (ts.at("==") and ts.accept("==")):
        return BinOp("=", e, _add(ts, lv))
    if ts.accept("!="):
        return Not(BinOp("=", e, _add(ts, lv)))
    if ts.accept("<="):
        return BinOp("<=", e, _add(ts, lv))
    return e


def _starts_command(ts: TokenStream, k: int = 0) -> bool:
    t = ts.peek(k)
    if t.kind == "id":
        if t.text in ("skip", "assume", "while", "if", "free", "error"):
            return True
        nxt = ts.peek(k + 1)
        return nxt.kind == "op" and nxt.text in (":=", "<-", "(")
    return t.kind == "op" and t.text in ("[", "{")


def _add(ts, lv):
    e = _unary(ts, lv)
    while True:
        t = ts.peek()
        # At statement level "+ (" opens a choice branch; inside parentheses it cannot.
        if t.kind == "op" and t.text in ("+", "-") and not _starts_command(ts, 1) \
                and not (t.text == "+" and ts.peek(1).text == "(" and not ts.depth):
            ts.next()
            e = BinOp(t.text, e, _unary(ts, lv))
        else:
            return e


def _unary(ts, lv):
    if ts.accept("!"):
        return Not(_unary(ts, lv))
    if ts.at("-") and ts.peek(1).kind == "num":
        ts.next()
        v = parse_number(ts.next().text)
        return Const(-v)
    return _atom(ts, lv)


def _atom(ts, lv):
    t = ts.peek()
    if t.kind == "num":
        ts.next()
        return Const(parse_number(t.text))
    if t.kind == "id":
        if t.text in ("true",):
            ts.next()
            return TRUE
        if t.text in ("false", "null"):
            ts.next()
            return Const(0)
        if t.text in KEYWORDS:
            ts.error("expected expression")
        ts.next()
        if lv and (t.text[0].isupper() or (t.text[0] == "_" and len(t.text) > 1 and t.text[1].isupper())):
            return LVar(t.text)
        if not lv and t.text[0] == "_" :
            raise ParseError("program variables cannot start with '_'", t.line, t.col)
        return Var(t.text)
    if ts.accept("("):
        ts.depth += 1
        e = _conj(ts, lv)
        ts.expect(")")
        ts.depth -= 1
        return e
    ts.error("expected expression")


def parse_expr(text: str) -> Expr:
    ts = TokenStream(text)
    e = parse_expr_tokens(ts)
    if ts.peek().kind != "eof":
        ts.error("trailing input")
    return e


# --------------------------------------------------------------- command parser


def _seq(ts: TokenStream, closers: Tuple[str, ...]) -> Command:
    items: List[Command] = []
    while True:
        while ts.peek().kind == "nl" or ts.at(";"):
            ts.next()
        t = ts.peek()
        if t.kind == "eof" or (t.kind == "op" and t.text in closers) or (t.kind == "id" and t.text == "proc"):
            break
        items.append(_choice(ts))
        t = ts.peek()
        if not (t.kind == "nl" or ts.at(";") or t.kind == "eof" or (t.kind == "op" and t.text in closers)):
            ts.error("expected ';' or newline")
    if not items:
        return Skip()
    return seq(*items)


def _choice(ts: TokenStream) -> Command:
    c = _catom(ts)
    while True:
        t = ts.peek_past_nl()
        if t.kind == "op" and t.text == "+":
            ts.skip_nl()
            ts.next()
            ts.skip_nl()
            c = Choice(c, _catom(ts))
        elif t.kind == "op" and t.text == "+[":
            ts.skip_nl()
            ts.next()
            pt = ts.next()
            if pt.kind != "num":
                raise ParseError("expected probability literal", pt.line, pt.col)
            ts.expect("]")
            ts.skip_nl()
            c = PChoice(Fraction(parse_number(pt.text)), c, _catom(ts))
        else:
            return c


def _block(ts: TokenStream) -> Command:
    ts.expect("{")
    c = _seq(ts, ("}",))
    ts.expect("}")
    return c


def _catom(ts: TokenStream) -> Command:
    t = ts.peek()
    if ts.accept("("):
        c = _seq(ts, (")",))
        ts.expect(")")
        return c
    if t.kind == "op" and t.text == "{":
        return _block(ts)
    if t.kind == "op" and t.text == "[":
        ts.next()
        a = parse_expr_tokens(ts)
        ts.expect("]")
        ts.expect("<-")
        return Store(a, parse_expr_tokens(ts))
    if t.kind != "id":
        ts.error("expected command")
    w = t.text
    if w == "skip":
        ts.next()
        return Skip()
    if w == "error":
        ts.next()
        ts.expect("(")
        ts.expect(")")
        return Error()
    if w == "assume":
        ts.next()
        ts.expect("(")
        e = parse_expr_tokens(ts)
        ts.expect(")")
        return Assume(e)
    if w == "free":
        ts.next()
        ts.expect("(")
        e = parse_expr_tokens(ts)
        ts.expect(")")
        return Free(e)
    if w == "while":
        ts.next()
        e = parse_expr_tokens(ts)
        ts.skip_nl()
        return While(e, _block(ts))
    if w == "if":
        ts.next()
        e = parse_expr_tokens(ts)
        ts.skip_nl()
        then = _block(ts)
        t2 = ts.peek_past_nl()
        if t2.kind == "id" and t2.text == "else":
            ts.skip_nl()
            ts.next()
            ts.skip_nl()
            if ts.at("if"):
                orelse = _catom(ts)
            else:
                orelse = _block(ts)
        else:
            orelse = Skip()
        return If(e, then, orelse)
    name = ts.ident()
    if ts.accept(":="):
        if ts.at("alloc") or ts.at("malloc"):
            kw = ts.next().text
            ts.expect("(")
            ts.expect(")")
            return Alloc(name) if kw == "alloc" else Malloc(name)
        return Assign(name, parse_expr_tokens(ts))
    if ts.accept("<-"):
        ts.expect("[")
        a = parse_expr_tokens(ts)
        ts.expect("]")
        return Load(name, a)
    if ts.accept("("):
        args: List[Expr] = []
        if not ts.at(")"):
            args.append(parse_expr_tokens(ts))
            while ts.accept(","):
                args.append(parse_expr_tokens(ts))
        ts.expect(")")
        return Call(name, tuple(args))
    ts.error("expected ':=', '<-' or '('")


def parse_command(text: str) -> Command:
    ts = TokenStream(text)
    c = _seq(ts, ())
    if ts.peek().kind != "eof":
        ts.error("trailing input")
    return c


def parse_program(text: str, entry: Optional[str] = None) -> Program:
    """Parse a sequence of `proc f(x, ...) { C }` definitions and validate it.

    Text without any `proc` is treated as the body of `main`.
    """
    ts = TokenStream(text)
    ts.skip_nl()
    procs: Dict[str, Proc] = {}
    if not ts.at("proc"):
        body = _seq(ts, ())
        if ts.peek().kind != "eof":
            ts.error("trailing input")
        procs["main"] = Proc("main", (), body)
    while ts.at("proc"):
        t = ts.next()
        name = ts.ident()
        ts.expect("(")
        params: List[str] = []
        if not ts.at(")"):
            params.append(ts.ident())
            while ts.accept(","):
                params.append(ts.ident())
        ts.expect(")")
        ts.skip_nl()
        body = _block(ts)
        if name in procs:
            raise ParseError(f"duplicate procedure {name}", t.line, t.col)
        if len(set(params)) != len(params):
            raise ParseError(f"duplicate parameter in {name}", t.line, t.col)
        procs[name] = Proc(name, tuple(params), body)
        ts.skip_nl()
    if ts.peek().kind != "eof":
        ts.error("expected 'proc'")
    if entry is None:
        entry = "main" if "main" in procs else list(procs)[-1]
    prog = Program(procs, entry)
    validate_program(prog)
    return prog


def validate_program(prog: Program) -> None:
    if prog.entry not in prog.procs:
        raise ProgramError(f"entry procedure {prog.entry} is not defined")
    for p in prog.procs.values():
        for c in _calls(p.body):
            if c.proc not in prog.procs:
                raise ProgramError(f"unknown procedure {c.proc} called from {p.name}")
            if len(c.args) != len(prog.procs[c.proc].params):
                raise ProgramError(
                    f"arity mismatch calling {c.proc} from {p.name}: "
                    f"expected {len(prog.procs[c.proc].params)}, got {len(c.args)}")
    prog.topo_order()


def _calls(c: Command) -> Iterator[Call]:
    if isinstance(c, Call):
        yield c
    for s in subcommands(c):
        yield from _calls(s)


# ------------------------------------------------------------------- printing


def show_expr(e: Expr) -> str:
    if isinstance(e, (Var, LVar)):
        return e.name
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, int) or (isinstance(v, Fraction) and v.denominator == 1):
            v = int(v)
            return str(v) if v >= 0 else f"({v})"
        return fmt_number(v)
    if isinstance(e, BinOp):
        return f"({show_expr(e.left)} {e.op} {show_expr(e.right)})"
    if isinstance(e, Not):
        return f"!{show_expr(e.arg)}" if not isinstance(e.arg, Not) else f"!({show_expr(e.arg)})"
    raise TypeError(e)


def show(c: Command, indent: int = 0) -> str:
    """Concrete syntax that parses back to the same AST."""
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Seq):
        a = show(c.first)
        if isinstance(c.first, Seq):
            a = f"({a})"
        return f"{a}; {show(c.second)}"
    if isinstance(c, Choice):
        a = show(c.left)
        b = show(c.right)
        if isinstance(c.left, Seq):
            a = f"({a})"
        if isinstance(c.right, (Seq, Choice, PChoice)):
            b = f"({b})"
        return f"{a} + {b}"
    if isinstance(c, PChoice):
        a = show(c.left)
        b = show(c.right)
        if isinstance(c.left, Seq):
            a = f"({a})"
        if isinstance(c.right, (Seq, Choice, PChoice)):
            b = f"({b})"
        return f"{a} +[{fmt_number(Fraction(c.prob))}] {b}"
    if isinstance(c, Assume):
        return f"assume({show_expr(c.cond)})"
    if isinstance(c, While):
        return f"while {show_expr(c.cond)} {{ {show(c.body)} }}"
    if isinstance(c, If):
        return f"if {show_expr(c.cond)} {{ {show(c.then)} }} else {{ {show(c.orelse)} }}"
    if isinstance(c, Assign):
        return f"{c.var} := {show_expr(c.expr)}"
    if isinstance(c, Alloc):
        return f"{c.var} := alloc()"
    if isinstance(c, Malloc):
        return f"{c.var} := malloc()"
    if isinstance(c, Free):
        return f"free({show_expr(c.addr)})"
    if isinstance(c, Store):
        return f"[{show_expr(c.addr)}] <- {show_expr(c.value)}"
    if isinstance(c, Load):
        return f"{c.var} <- [{show_expr(c.addr)}]"
    if isinstance(c, Error):
        return "error()"
    if isinstance(c, Call):
        return f"{c.proc}({', '.join(show_expr(a) for a in c.args)})"
    raise TypeError(c)


def show_program(p: Program) -> str:
    return "\n".join(f"proc {q.name}({', '.join(q.params)}) {{ {show(q.body)} }}"
                     for q in p.procs.values())
