"""Checking pipeline shared by the CLI, the corpus loader, and the tests:
parse, elaborate, kernel-check, and run directives in source order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import elab, kernel
from .core import CoreDecl, pretty
from .kernel import GlobalEnv, KernelError
from .surface import (
    AssertDefeq,
    Axiom,
    CheckDirective,
    Def,
    EvalDirective,
    SourceSpan,
    SurfaceDecl,
    SurfaceError,
    parse_file,
)


@dataclass
class Event:
    kind: str  # "decl" | "check" | "eval" | "assert"
    span: SourceSpan
    text: str
    ok: bool = True


@dataclass
class FileResult:
    filename: str
    events: list[Event] = field(default_factory=list)
    error: SurfaceError | KernelError | None = None
    error_span: SourceSpan | None = None

    @property
    def declarations_checked(self) -> int:
        return sum(1 for e in self.events if e.kind == "decl")

    @property
    def assertions_passed(self) -> int:
        return sum(1 for e in self.events if e.kind == "assert" and e.ok)

    @property
    def assertions_failed(self) -> int:
        return sum(1 for e in self.events if e.kind == "assert" and not e.ok)


def whole_file_span(filename: str, text: str) -> SourceSpan:
    lines = text.splitlines() or [""]
    return SourceSpan(filename, 1, 1, len(lines), max(1, len(lines[-1])))


def process_decl(globals: GlobalEnv, d: SurfaceDecl) -> tuple[GlobalEnv, Event]:
    """Elaborate and check one declaration or directive."""
    match d:
        case Def() | Axiom():
            core = elab.elaborate_decl(globals, d)
            globals = kernel.check_decl(globals, core)
            return globals, Event("decl", d.span, d.name)
        case CheckDirective(term=t, span=span):
            core, ty = elab.elaborate_term(globals, t)
            return globals, Event("check", span, f"{pretty(core)} : {pretty(ty)}")
        case EvalDirective(term=t, span=span):
            core, ty = elab.elaborate_term(globals, t)
            nf = kernel.normalize(globals, core)
            return globals, Event("eval", span, f"{pretty(nf)} : {pretty(ty)}")
        case AssertDefeq(lhs=l, rhs=r, at_type=ty, span=span):
            ty_core, _ = elab.elaborate_term(globals, ty)
            ty_v = kernel.eval_term([], globals, ty_core)
            ctx = elab.ElabCtx(globals)
            l_core = elab.zonk(ctx, elab.check(ctx, l, ty_v))
            r_core = elab.zonk(ctx, elab.check(ctx, r, ty_v))
            ok = kernel.assert_defeq(globals, l_core, r_core, ty_core)
            text = f"{pretty(l_core)} ~ {pretty(r_core)}"
            return globals, Event("assert", span, text, ok)
    raise ValueError(f"unknown declaration {d!r}")


def check_source(globals: GlobalEnv, text: str, filename: str) -> tuple[GlobalEnv, FileResult]:
    """Check one file against (and extending) `globals`.

    Stops at the first error in the file; the returned environment contains
    everything admitted before the error.
    """
    result = FileResult(filename)
    try:
        decls = parse_file(text, filename)
    except SurfaceError as e:
        result.error = e
        result.error_span = e.span
        return globals, result

    for d in decls:
        try:
            globals, event = process_decl(globals, d)
        except SurfaceError as e:
            result.error = e
            result.error_span = e.span
            return globals, result
        except KernelError as e:
            result.error = e
            result.error_span = getattr(d, "span", whole_file_span(filename, text))
            return globals, result
        result.events.append(event)
        if event.kind == "assert" and not event.ok:
            # a failed assertion is an error for the report, but checking
            # continues so all assertion outcomes are visible
            continue
    return globals, result
