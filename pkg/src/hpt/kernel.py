"""The trusted core: evaluation to semantic values, readback, conversion,
and type checking of core declarations.

Evaluation is normalization by evaluation: terms evaluate into a semantic
domain (functions become closures, stuck eliminations become neutrals with
spines) and normal forms are read back from values. J applied to refl
reduces to its base argument. Defined globals unfold lazily: applying one
builds a glued value (VTop) that remembers the global and its spine, and
conversion first tries spine equality of same-named tops before falling
back to the unfolding, so neutral heads proper are only bound variables,
axioms, and unsolved metavariables.

A GlobalEnv is frozen once loaded; eval/conv/infer_type are pure given
frozen globals and may run concurrently. check_decl extends a GlobalEnv
owned by a single session (copy-on-extend, so older environments stay
valid).

A step budget (default 10**8) turns runaway evaluation of malformed input
into a BudgetExhausted error instead of a hang; it is charged at closure
application and J elimination, which any divergent computation must pass
through.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass

from .core import (
    App,
    CoreDecl,
    CoreTerm,
    Global,
    Id,
    J,
    Lam,
    Level,
    Meta,
    Pi,
    Refl,
    Type,
    Var,
    pretty,
)

DEFAULT_STEP_BUDGET = 10**8


class KernelError(Exception):
    pass


class BudgetExhausted(KernelError):
    def __init__(self) -> None:
        super().__init__("evaluation step budget exhausted")


class DuplicateName(KernelError):
    def __init__(self, name: str) -> None:
        super().__init__(f"duplicate global name {name!r}")
        self.name = name


class KernelTypeError(KernelError):
    """A core term failed to check. `path` locates the offending subterm."""

    def __init__(
        self,
        path: tuple[str, ...],
        message: str,
        expected: CoreTerm | None = None,
        found: CoreTerm | None = None,
    ) -> None:
        detail = message
        if expected is not None:
            detail += f"\n  expected: {pretty(expected)}"
        if found is not None:
            detail += f"\n  found:    {pretty(found)}"
        where = "/".join(path) if path else "<root>"
        super().__init__(f"at {where}: {detail}")
        self.path = path
        self.message = message
        self.expected = expected
        self.found = found


class _Budget:
    __slots__ = ("remaining",)

    def __init__(self, limit: int) -> None:
        self.remaining = limit

    def tick(self) -> None:
        self.remaining -= 1
        if self.remaining < 0:
            raise BudgetExhausted()


_budget_var: contextvars.ContextVar[_Budget | None] = contextvars.ContextVar(
    "hpt_kernel_budget", default=None
)


class step_budget:
    """Context manager installing an evaluation step budget."""

    def __init__(self, limit: int = DEFAULT_STEP_BUDGET) -> None:
        self.limit = limit
        self._token: contextvars.Token | None = None

    def __enter__(self) -> "step_budget":
        self._token = _budget_var.set(_Budget(self.limit))
        return self

    def __exit__(self, *exc) -> None:
        assert self._token is not None
        _budget_var.reset(self._token)


def _tick() -> None:
    budget = _budget_var.get()
    if budget is not None:
        budget.tick()


# ---------------------------------------------------------------------------
# Values


class Value:
    __slots__ = ()


class Head:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class HVar(Head):
    level: int


@dataclass(frozen=True, slots=True)
class HGlobal(Head):
    name: str


@dataclass(frozen=True, slots=True)
class HMeta(Head):
    id: int


class Elim:
    __slots__ = ()


@dataclass(frozen=True, eq=False, slots=True)
class EApp(Elim):
    arg: Value


@dataclass(frozen=True, eq=False, slots=True)
class EJ(Elim):
    """A stuck J elimination. The endpoint is carried for readback only;
    it is determined by the scrutinee, so conversion ignores it."""

    motive: Value
    base: Value
    endpoint: Value


class Closure:
    """A suspended body over a captured environment.

    Application is memoized by argument identity: normalization applies the
    same closure to the same (shared) fresh variable many times over. When
    the closure's term still contains metavariables, memo entries are
    tagged with the store's rollback counter so that results embedding
    speculatively-made (and later retracted) solutions are not reused.
    """

    __slots__ = ("env", "term", "globals", "metas", "_memo")

    def __init__(
        self,
        env: tuple[Value, ...],
        term: CoreTerm,
        globals: "GlobalEnv",
        metas: object | None = None,
    ) -> None:
        self.env = env
        self.term = term
        self.globals = globals
        self.metas = metas
        self._memo: list[tuple[Value, Value, int]] = []

    def apply(self, v: Value) -> Value:
        stamp = 0 if self.metas is None else getattr(self.metas, "rollbacks", 0)
        for key, result, mark in self._memo:
            if key is v and mark == stamp:
                return result
        _tick()
        result = eval_term(list(self.env) + [v], self.globals, self.term, self.metas)
        if len(self._memo) < 8:
            self._memo.append((v, result, stamp))
        return result


@dataclass(frozen=True, eq=False, slots=True)
class VLam(Value):
    hint: str
    closure: Closure
    domain: Value | None = None
    implicit: bool = False


@dataclass(frozen=True, eq=False, slots=True)
class VPi(Value):
    hint: str
    domain: Value
    closure: Closure
    implicit: bool = False


@dataclass(frozen=True, eq=False, slots=True)
class VType(Value):
    level: Level


@dataclass(frozen=True, eq=False, slots=True)
class VId(Value):
    type: Value
    lhs: Value
    rhs: Value


@dataclass(frozen=True, eq=False, slots=True)
class VRefl(Value):
    point: Value


@dataclass(frozen=True, eq=False, slots=True)
class VNeutral(Value):
    head: Head
    spine: tuple[Elim, ...] = ()


class VTop(Value):
    """A defined global applied to a spine, with its unfolding on demand.

    Conversion first tries spine equality of same-named tops and unfolds
    only as a fallback, which keeps corpus checking fast without affecting
    which terms are convertible.
    """

    __slots__ = ("name", "spine", "entry", "_forced")

    def __init__(self, name: str, spine: tuple[Elim, ...], entry: "GlobalEntry") -> None:
        self.name = name
        self.spine = spine
        self.entry = entry
        self._forced: Value | None = None

    def force(self) -> Value:
        v = self._forced
        if v is None:
            v = self.entry.body_value
            assert v is not None
            for elim in self.spine:
                match elim:
                    case EApp(arg):
                        v = apply_value(v, arg)
                    case EJ(m, b, e):
                        v = j_apply(m, b, e, v)
            while isinstance(v, VTop):
                v = v.force()
            self._forced = v
        return v


def force_top(v: Value) -> Value:
    """Unfold defined-global applications until a canonical shape appears."""
    while isinstance(v, VTop):
        v = v.force()
    return v


def fresh_var(depth: int) -> Value:
    return VNeutral(HVar(depth))


# ---------------------------------------------------------------------------
# Global environment


@dataclass(frozen=True, eq=False, slots=True)
class GlobalEntry:
    name: str
    type_value: Value
    body_value: Value | None
    type_core: CoreTerm
    body_core: CoreTerm | None


class GlobalEnv:
    """Ordered map of checked declarations. Read-only after loading."""

    def __init__(self, entries: dict[str, GlobalEntry] | None = None) -> None:
        self._entries: dict[str, GlobalEntry] = dict(entries or {})

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, name: str) -> GlobalEntry | None:
        return self._entries.get(name)

    def extended(self, entry: GlobalEntry) -> "GlobalEnv":
        new = dict(self._entries)
        new[entry.name] = entry
        return GlobalEnv(new)

    def names(self) -> list[str]:
        return list(self._entries)


# ---------------------------------------------------------------------------
# Evaluation


def eval_term(
    env: list[Value], globals: GlobalEnv, t: CoreTerm, metas: object | None = None
) -> Value:
    match t:
        case Var(i):
            return env[len(env) - 1 - i]
        case App(f, x):
            fv = eval_term(env, globals, f, metas)
            xv = eval_term(env, globals, x, metas)
            return apply_value(fv, xv)
        case Global(name):
            entry = globals.get(name)
            if entry is None:
                raise KernelError(f"unknown global {name!r}")
            if entry.body_value is not None:
                return VTop(name, (), entry)
            return VNeutral(HGlobal(name))
        case Lam(h, body, ann):
            dom = eval_term(env, globals, ann, metas) if ann is not None else None
            return VLam(h, Closure(tuple(env), body, globals, metas), dom, t.implicit)
        case Pi(h, dom, cod, imp):
            return VPi(h, eval_term(env, globals, dom, metas), Closure(tuple(env), cod, globals, metas), imp)
        case Type(lvl):
            return VType(lvl)
        case Id(ty, l, r):
            return VId(
                eval_term(env, globals, ty, metas),
                eval_term(env, globals, l, metas),
                eval_term(env, globals, r, metas),
            )
        case Refl(p):
            return VRefl(eval_term(env, globals, p, metas))
        case J(m, b, e, p):
            mv = eval_term(env, globals, m, metas)
            bv = eval_term(env, globals, b, metas)
            ev = eval_term(env, globals, e, metas)
            pv = eval_term(env, globals, p, metas)
            return j_apply(mv, bv, ev, pv)
        case Meta(i):
            if metas is not None:
                entry = metas.solution_entry(i)  # type: ignore[attr-defined]
                if entry is not None:
                    d, term = entry
                    # The solution is an open term over the meta's first
                    # `d` binders; evaluate it under the env prefix.
                    return eval_term(env[:d], globals, term, metas)
            return VNeutral(HMeta(i))
    raise KernelError(f"cannot evaluate {t!r}")


def apply_value(f: Value, x: Value) -> Value:
    match f:
        case VLam(_, clo, _, _):
            return clo.apply(x)
        case VNeutral(head, spine):
            return VNeutral(head, spine + (EApp(x),))
    if isinstance(f, VTop):
        return VTop(f.name, f.spine + (EApp(x),), f.entry)
    raise KernelError("applied a non-function value (ill-typed input)")


def j_apply(motive: Value, base: Value, endpoint: Value, path: Value) -> Value:
    _tick()
    # The beta decision needs the path's canonical shape, so a glued
    # global application is unfolded here.
    path = force_top(path)
    match path:
        case VRefl(_):
            return base
        case VNeutral(head, spine):
            return VNeutral(head, spine + (EJ(motive, base, endpoint),))
    raise KernelError("J applied to a non-path value (ill-typed input)")


# ---------------------------------------------------------------------------
# Readback


def readback(depth: int, v: Value, unfold_top: bool = False) -> CoreTerm:
    """Read a value back to a beta-normal core term.

    With unfold_top=True defined globals are unfolded away (full normal
    forms, as printed by evaluation commands); otherwise glued global
    applications read back as the global applied to its spine.
    Eta-expansion is not performed here; conversion handles eta for Pi by
    comparing values applicatively.
    """
    if isinstance(v, VTop):
        if unfold_top:
            v = force_top(v)
        else:
            t: CoreTerm = Global(v.name)
            return _readback_spine(depth, t, v.spine, unfold_top)
    match v:
        case VLam(h, clo, dom, imp):
            body = readback(depth + 1, clo.apply(fresh_var(depth)), unfold_top)
            ann = readback(depth, dom, unfold_top) if dom is not None else None
            return Lam(h, body, ann, imp)
        case VPi(h, dom, clo, imp):
            cod = readback(depth + 1, clo.apply(fresh_var(depth)), unfold_top)
            return Pi(h, readback(depth, dom, unfold_top), cod, imp)
        case VType(lvl):
            return Type(lvl)
        case VId(ty, l, r):
            return Id(
                readback(depth, ty, unfold_top),
                readback(depth, l, unfold_top),
                readback(depth, r, unfold_top),
            )
        case VRefl(p):
            return Refl(readback(depth, p, unfold_top))
        case VNeutral(head, spine):
            return _readback_spine(depth, _readback_head(depth, head), spine, unfold_top)
    raise KernelError(f"cannot read back {v!r}")


def _readback_spine(
    depth: int, t: CoreTerm, spine: tuple[Elim, ...], unfold_top: bool
) -> CoreTerm:
    for elim in spine:
        match elim:
            case EApp(arg):
                t = App(t, readback(depth, arg, unfold_top))
            case EJ(m, b, e):
                t = J(
                    readback(depth, m, unfold_top),
                    readback(depth, b, unfold_top),
                    readback(depth, e, unfold_top),
                    t,
                )
    return t


def _readback_head(depth: int, head: Head) -> CoreTerm:
    match head:
        case HVar(lvl):
            return Var(depth - 1 - lvl)
        case HGlobal(name):
            return Global(name)
        case HMeta(i):
            return Meta(i)
    raise KernelError(f"bad head {head!r}")


# ---------------------------------------------------------------------------
# Conversion


def conv(depth: int, a: Value, b: Value) -> bool:
    """Definitional equality of two values of a common type."""
    if a is b:
        return True
    if isinstance(a, VTop):
        if isinstance(b, VTop) and a.name == b.name and _conv_spines(depth, a.spine, b.spine):
            return True
        return conv(depth, a.force(), b.force() if isinstance(b, VTop) else b)
    if isinstance(b, VTop):
        return conv(depth, a, b.force())
    match a, b:
        case VType(l1), VType(l2):
            return l1 == l2
        case VId(t1, l1, r1), VId(t2, l2, r2):
            return conv(depth, t1, t2) and conv(depth, l1, l2) and conv(depth, r1, r2)
        case VRefl(p1), VRefl(p2):
            return conv(depth, p1, p2)
        case VPi(_, d1, c1, i1), VPi(_, d2, c2, i2):
            if i1 != i2 or not conv(depth, d1, d2):
                return False
            x = fresh_var(depth)
            return conv(depth + 1, c1.apply(x), c2.apply(x))
        case VLam(), _:
            if not isinstance(b, (VLam, VNeutral)):
                return False
            x = fresh_var(depth)
            return conv(depth + 1, a.closure.apply(x), apply_value(b, x))
        case _, VLam():
            if not isinstance(a, (VLam, VNeutral)):
                return False
            x = fresh_var(depth)
            return conv(depth + 1, apply_value(a, x), b.closure.apply(x))
        case VNeutral(h1, sp1), VNeutral(h2, sp2):
            if h1 != h2:
                return False
            return _conv_spines(depth, sp1, sp2)
        case _:
            return False


def _conv_spines(depth: int, sp1: tuple[Elim, ...], sp2: tuple[Elim, ...]) -> bool:
    if len(sp1) != len(sp2):
        return False
    for e1, e2 in zip(sp1, sp2):
        match e1, e2:
            case EApp(x1), EApp(x2):
                if not conv(depth, x1, x2):
                    return False
            case EJ(m1, b1, _), EJ(m2, b2, _):
                # endpoints are determined by the shared scrutinee
                if not (conv(depth, m1, m2) and conv(depth, b1, b2)):
                    return False
            case _:
                return False
    return True


# ---------------------------------------------------------------------------
# Type checking


def _env_of_depth(depth: int) -> list[Value]:
    return [fresh_var(i) for i in range(depth)]


def infer_type(
    ctx: list[Value],
    globals: GlobalEnv,
    t: CoreTerm,
    env: list[Value] | None = None,
    path: tuple[str, ...] = (),
) -> Value:
    """Infer the unique-up-to-conv type of a core term.

    `ctx` holds the types of the free variables (innermost last); `env`
    optionally supplies their values (defaults to the identity environment
    of fresh variables).
    """
    depth = len(ctx)
    if env is None:
        env = _env_of_depth(depth)

    match t:
        case Var(i):
            if i >= depth:
                raise KernelTypeError(path, f"unbound variable index {i}")
            return ctx[depth - 1 - i]
        case Global(name):
            entry = globals.get(name)
            if entry is None:
                raise KernelTypeError(path, f"unknown global {name!r}")
            return entry.type_value
        case Type(lvl):
            return VType(Level(lvl.index + 1))
        case Pi(_, dom, cod, _):
            i = _infer_universe(ctx, globals, dom, env, path + ("domain",))
            dom_v = eval_term(env, globals, dom)
            j = _infer_universe(
                ctx + [dom_v], globals, cod, env + [fresh_var(depth)], path + ("codomain",)
            )
            return VType(Level(max(i, j)))
        case Id(ty, l, r):
            i = _infer_universe(ctx, globals, ty, env, path + ("type",))
            ty_v = eval_term(env, globals, ty)
            _check_against(ctx, globals, l, ty_v, env, path + ("lhs",))
            _check_against(ctx, globals, r, ty_v, env, path + ("rhs",))
            return VType(Level(i))
        case Refl(p):
            pt = infer_type(ctx, globals, p, env, path + ("point",))
            pv = eval_term(env, globals, p)
            return VId(pt, pv, pv)
        case Lam(h, body, ann, imp):
            if ann is None:
                raise KernelTypeError(path, "cannot infer an unannotated lambda")
            _infer_universe(ctx, globals, ann, env, path + ("annotation",))
            dom_v = eval_term(env, globals, ann)
            body_ty = infer_type(
                ctx + [dom_v], globals, body, env + [fresh_var(depth)], path + ("body",)
            )
            cod_core = readback(depth + 1, body_ty)
            return VPi(h, dom_v, Closure(tuple(env), cod_core, globals), imp)
        case App():
            # Flatten the application spine so an n-ary application infers
            # its head once instead of once per argument.
            spine: list[CoreTerm] = []
            head: CoreTerm = t
            while isinstance(head, App):
                spine.append(head.arg)
                head = head.fn
            spine.reverse()
            fty = infer_type(ctx, globals, head, env, path + ("fn",))
            for k, x in enumerate(spine):
                fty = force_top(fty)
                if not isinstance(fty, VPi):
                    raise KernelTypeError(
                        path, "applied a term whose type is not a function type",
                        found=readback(depth, fty),
                    )
                _check_against(ctx, globals, x, fty.domain, env, path + (f"arg{k}",))
                fty = fty.closure.apply(eval_term(env, globals, x))
            return fty
        case J(m, b, e, p):
            pty = force_top(infer_type(ctx, globals, p, env, path + ("path",)))
            if not isinstance(pty, VId):
                raise KernelTypeError(
                    path, "J scrutinee is not an identity proof", found=readback(depth, pty)
                )
            base_pt, end_v = pty.lhs, pty.rhs
            _check_against(ctx, globals, e, pty.type, env, path + ("endpoint",))
            ev = eval_term(env, globals, e)
            if not conv(depth, ev, end_v):
                raise KernelTypeError(
                    path + ("endpoint",),
                    "J endpoint does not match the path's right endpoint",
                    expected=readback(depth, end_v),
                    found=readback(depth, ev),
                )
            mty = force_top(infer_type(ctx, globals, m, env, path + ("motive",)))
            if not isinstance(mty, VPi):
                raise KernelTypeError(path + ("motive",), "J motive must be a two-argument function")
            if not conv(depth, mty.domain, pty.type):
                raise KernelTypeError(
                    path + ("motive",),
                    "J motive's first argument must range over the path's type",
                    expected=readback(depth, pty.type),
                    found=readback(depth, mty.domain),
                )
            x = fresh_var(depth)
            inner = force_top(mty.closure.apply(x))
            if not isinstance(inner, VPi):
                raise KernelTypeError(path + ("motive",), "J motive must be a two-argument function")
            want = VId(pty.type, base_pt, x)
            if not conv(depth + 1, inner.domain, want):
                raise KernelTypeError(
                    path + ("motive",),
                    "J motive's second argument must be a path from the base point",
                    expected=readback(depth + 1, want),
                    found=readback(depth + 1, inner.domain),
                )
            sort = force_top(inner.closure.apply(fresh_var(depth + 1)))
            if not isinstance(sort, VType):
                raise KernelTypeError(path + ("motive",), "J motive must land in a universe")
            mv = eval_term(env, globals, m)
            base_wanted = apply_value(apply_value(mv, base_pt), VRefl(base_pt))
            _check_value(ctx, globals, b, base_wanted, env, path + ("base",))
            pv = eval_term(env, globals, p)
            return apply_value(apply_value(mv, end_v), pv)
        case Meta(i):
            raise KernelTypeError(path, f"unsolved metavariable ?{i} reached the kernel")
    raise KernelTypeError(path, f"unrecognized term {t!r}")


def _infer_universe(
    ctx: list[Value], globals: GlobalEnv, t: CoreTerm, env: list[Value], path: tuple[str, ...]
) -> int:
    ty = force_top(infer_type(ctx, globals, t, env, path))
    if not isinstance(ty, VType):
        raise KernelTypeError(path, "expected a type", found=readback(len(ctx), ty))
    return ty.level.index


def _check_against(
    ctx: list[Value],
    globals: GlobalEnv,
    t: CoreTerm,
    expected: Value,
    env: list[Value],
    path: tuple[str, ...],
) -> None:
    """Check t against an expected type, descending through lambdas."""
    depth = len(ctx)
    expected = force_top(expected)
    if isinstance(t, Lam) and isinstance(expected, VPi):
        if t.implicit != expected.implicit:
            raise KernelTypeError(path, "binder plicity mismatch")
        if t.ann is not None:
            _infer_universe(ctx, globals, t.ann, env, path + ("annotation",))
            ann_v = eval_term(env, globals, t.ann)
            if not conv(depth, ann_v, expected.domain):
                raise KernelTypeError(
                    path + ("annotation",),
                    "lambda annotation does not match expected domain",
                    expected=readback(depth, expected.domain),
                    found=readback(depth, ann_v),
                )
        x = fresh_var(depth)
        _check_against(
            ctx + [expected.domain],
            globals,
            t.body,
            expected.closure.apply(x),
            env + [x],
            path + ("body",),
        )
        return
    _check_value(ctx, globals, t, expected, env, path)


def _check_value(
    ctx: list[Value],
    globals: GlobalEnv,
    t: CoreTerm,
    expected: Value,
    env: list[Value],
    path: tuple[str, ...],
) -> None:
    actual = infer_type(ctx, globals, t, env, path)
    depth = len(ctx)
    if not conv(depth, actual, expected):
        raise KernelTypeError(
            path,
            "type mismatch",
            expected=readback(depth, expected),
            found=readback(depth, actual),
        )


def check_decl(globals: GlobalEnv, d: CoreDecl) -> GlobalEnv:
    """Admit a declaration: its type must be a type and its body (if any)
    must check against it. Returns the extended environment."""
    if d.name in globals:
        raise DuplicateName(d.name)
    with _ensure_budget():
        _infer_universe([], globals, d.type, [], (d.name, "type"))
        ty_v = eval_term([], globals, d.type)
        body_v = None
        if d.body is not None:
            _check_against([], globals, d.body, ty_v, [], (d.name, "body"))
            body_v = eval_term([], globals, d.body)
    return globals.extended(GlobalEntry(d.name, ty_v, body_v, d.type, d.body))


def assert_defeq(globals: GlobalEnv, l: CoreTerm, r: CoreTerm, ty: CoreTerm) -> bool:
    """Do l and r check against ty and evaluate to convertible values?

    Raises KernelTypeError if either side fails to check; returns the
    conversion verdict otherwise.
    """
    with _ensure_budget():
        _infer_universe([], globals, ty, [], ("assert", "type"))
        ty_v = eval_term([], globals, ty)
        _check_against([], globals, l, ty_v, [], ("assert", "lhs"))
        _check_against([], globals, r, ty_v, [], ("assert", "rhs"))
        return conv(0, eval_term([], globals, l), eval_term([], globals, r))


def normalize(globals: GlobalEnv, t: CoreTerm, depth: int = 0) -> CoreTerm:
    """Full normal form of a well-typed term (defined globals unfolded)."""
    with _ensure_budget():
        env = _env_of_depth(depth)
        return readback(depth, eval_term(env, globals, t), unfold_top=True)


class _ensure_budget:
    """Install the default budget unless one is already active."""

    def __init__(self) -> None:
        self._inner: step_budget | None = None

    def __enter__(self):
        if _budget_var.get() is None:
            self._inner = step_budget(DEFAULT_STEP_BUDGET)
            self._inner.__enter__()
        return self

    def __exit__(self, *exc) -> None:
        if self._inner is not None:
            self._inner.__exit__(*exc)
