"""
Text form of specifications.

```
(achieve reach(g1) or achieve reach(g2)); achieve reach(goal) ensuring avoid(obs)
```

Precedence from loosest to tightest: `ensuring`, `;`, `or`. All three associate to the
left. Predicate arguments are numbers or symbols; a symbol expands to the numbers bound
to it in the `symbols` mapping. A predicate takes the label given by `as NAME`, or else
the name of its first symbol argument.
"""

import logging
from collections.abc import Mapping, Sequence

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, VisitError

from genrl._core.spec_lang import (
    Achieve,
    AtomicPredicate,
    Choice,
    Ensuring,
    PredicateKind,
    Seq,
    Spec,
)
from genrl.errors import GenRLError, InvalidInputError, SpecSyntaxError

log = logging.getLogger(__name__)

GRAMMAR = r"""
start: spec

?spec: seq
     | spec "ensuring" pred    -> ensuring

?seq: choice
    | seq ";" choice           -> seq

?choice: atom
       | choice "or" atom      -> choice

?atom: "achieve" pred          -> achieve
     | "(" spec ")"

pred: NAME "(" arg ("," arg)* ")" label?
label: "as" NAME

?arg: SIGNED_NUMBER            -> number
    | NAME                     -> symbol

%import common.CNAME -> NAME
%import common.SIGNED_NUMBER
%import common.WS
%ignore WS
%ignore /#[^\n]*/
"""

_parser = Lark(GRAMMAR, parser="lalr", propagate_positions=True)

Symbols = Mapping[str, float | Sequence[float]]


def _syntax_error(message: str, line: int | None, column: int | None, text: str):
    if line is None or line < 1:
        lines = text.splitlines() or [""]
        line, column = len(lines), len(lines[-1]) + 1
    err = SpecSyntaxError(message, line=line, column=column)
    log.error(err, exc_info=True)
    return err


@v_args(inline=True)
class _ToSpec(Transformer):
    def __init__(self, symbols: Symbols) -> None:
        super().__init__()
        self.symbols = symbols

    def start(self, spec):
        return spec

    def number(self, tok: Token):
        return [float(tok)], None

    def symbol(self, tok: Token):
        if tok not in self.symbols:
            raise SpecSyntaxError(
                f"Unknown symbol '{tok}'.", line=tok.line, column=tok.column
            )
        value = self.symbols[tok]
        if isinstance(value, int | float):
            return [float(value)], str(tok)
        return [float(x) for x in value], str(tok)

    def label(self, tok: Token):
        return str(tok)

    def pred(self, name: Token, *rest):
        label = None
        if rest and isinstance(rest[-1], str):
            label, rest = rest[-1], rest[:-1]
        try:
            kind = PredicateKind(str(name))
        except ValueError:
            raise SpecSyntaxError(
                f"Unknown predicate '{name}'.", line=name.line, column=name.column
            ) from None
        params = []
        for values, sym in rest:
            params.extend(values)
            if label is None and sym is not None:
                label = sym
        try:
            return AtomicPredicate(kind=kind, params=tuple(params), name=label)
        except InvalidInputError as err:
            raise SpecSyntaxError(str(err), line=name.line, column=name.column) from err

    def achieve(self, pred):
        return Achieve(pred=pred)

    def ensuring(self, spec, pred):
        return Ensuring(spec=spec, pred=pred)

    def seq(self, first, second):
        return Seq(first=first, second=second)

    def choice(self, left, right):
        return Choice(left=left, right=right)


def parse_spec(text: str, symbols: Symbols | None = None) -> Spec:
    """
    Parse a specification.

    :param text: The specification text.
    :param symbols: Values for symbolic predicate arguments.
    :raises SpecSyntaxError: On malformed text, unknown predicates or symbols, and
        predicate arguments that break the predicate's invariants.
    """
    try:
        tree = _parser.parse(text)
    except UnexpectedCharacters as err:
        raise _syntax_error(
            f"Unexpected character {text[err.pos_in_stream]!r}.", err.line, err.column, text
        ) from err
    except UnexpectedInput as err:
        token = getattr(err, "token", None)
        what = "end of input" if token is None or token.type == "$END" else repr(str(token))
        raise _syntax_error(f"Unexpected {what}.", err.line, err.column, text) from err
    try:
        return _ToSpec(symbols or {}).transform(tree)
    except VisitError as err:
        if isinstance(err.orig_exc, GenRLError):
            log.error(err.orig_exc, exc_info=True)
            raise err.orig_exc from None
        raise


# Binding strength used by the printer.
_LEVEL = {Ensuring: 0, Seq: 1, Choice: 2, Achieve: 3}


def format_predicate(p: AtomicPredicate) -> str:
    return p.describe()


def format_spec(spec: Spec) -> str:
    """Print a specification so that `parse_spec` rebuilds an equal formula."""

    def fmt(node: Spec, min_level: int) -> str:
        text = _format(node)
        return f"({text})" if _LEVEL[type(node)] < min_level else text

    def _format(node: Spec) -> str:
        match node:
            case Achieve(pred=p):
                return f"achieve {format_predicate(p)}"
            case Ensuring(spec=inner, pred=p):
                return f"{fmt(inner, 0)} ensuring {format_predicate(p)}"
            case Seq(first=a, second=b):
                return f"{fmt(a, 1)}; {fmt(b, 2)}"
            case Choice(left=a, right=b):
                return f"{fmt(a, 2)} or {fmt(b, 3)}"
        raise InvalidInputError(f"Not a formula: {node!r}")

    return _format(spec)
