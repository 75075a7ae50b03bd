"""The bundled `.hpt` corpus and its machine-readable manifest.

The corpus is a dependency-ordered sequence of sources (numeric filename
prefixes fix the order) that parse, elaborate, and kernel-check with zero
errors, together with a manifest cross-indexing every declaration to its
anchor in the written development and a pinned list of definitional
assertions that must hold.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from . import driver, elab, kernel
from .driver import FileResult
from .kernel import GlobalEnv

_BUNDLED = Path(__file__).resolve().parent / "corpus"

KINDS = ("axiom", "definition", "lemma", "theorem", "assertion")


@dataclass(frozen=True)
class CorpusEntry:
    decl_name: str
    statement_summary: str
    paper_anchor: str
    kind: str


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[CorpusEntry, ...]
    assertion_count: int


def corpus_dir() -> Path:
    override = os.environ.get("HPT_CORPUS_DIR")
    if override:
        return Path(override)
    return _BUNDLED


def prelude_sources() -> list[tuple[str, str]]:
    """The corpus sources in dependency order as (filename, text) pairs."""
    root = corpus_dir()
    files = sorted(p for p in root.glob("*.hpt"))
    return [(p.name, p.read_text(encoding="utf-8")) for p in files]


def manifest() -> CorpusManifest:
    """Parse the shipped manifest table (name, kind, anchor, summary per line)."""
    path = corpus_dir() / "manifest.tsv"
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        name, kind, anchor = parts[0], parts[1], parts[2]
        summary = parts[3] if len(parts) > 3 else ""
        if kind not in KINDS:
            raise ValueError(f"manifest: unknown kind {kind!r} for {name!r}")
        entries.append(CorpusEntry(name, summary, anchor, kind))
    count = 0
    for _, text in prelude_sources():
        count += sum(1 for ln in text.splitlines() if ln.strip().startswith("#assert"))
    return CorpusManifest(tuple(entries), count)


def required_assertions() -> list[tuple[str, str, str]]:
    """Definitional equalities the corpus must satisfy, as
    (lhs, rhs, type) surface-syntax triples."""
    two = "(refl (refl star))"
    three = "refl (refl (refl star))"
    four = f"refl ({three})"
    return [
        ("concat (refl star) (refl star)", "refl star", "star = star"),
        ("concat-1-L (refl star)", "refl (refl star)",
         "refl star * refl star = refl star"),
        ("concat-1-R (refl star)", "refl (refl star)",
         "refl star * refl star = refl star"),
        ("whisk-L (refl star) (refl (refl star))", "refl (refl star)",
         "refl star * refl star = refl star * refl star"),
        ("whisk-R (refl (refl star)) (refl star)", "refl (refl star)",
         "refl star * refl star = refl star * refl star"),
        (f"EH {two} {two}", three, "refl (refl star) = refl (refl star)"),
        (f"EH-1-L {two}", four,
         f"EH {two} {two} = concat-1-L {two} * inv (concat-1-R {two})"),
        (f"EH-1-R {two}", four,
         f"EH {two} {two} = concat-1-R {two} * inv (concat-1-L {two})"),
    ]


def load_corpus(globals: GlobalEnv | None = None) -> tuple[GlobalEnv, list[FileResult]]:
    """Check the whole corpus in order. Raises on the first error."""
    env = globals if globals is not None else GlobalEnv()
    results = []
    for filename, text in prelude_sources():
        env, result = driver.check_source(env, text, filename)
        results.append(result)
        if result.error is not None:
            raise result.error
        if result.assertions_failed:
            raise kernel.KernelError(
                f"{filename}: {result.assertions_failed} definitional assertion(s) failed"
            )
    return env, results


def run_required_assertions(env: GlobalEnv) -> list[tuple[str, bool]]:
    """Evaluate every pinned assertion against a loaded corpus environment."""
    from .surface import parse_term

    out = []
    for lhs, rhs, ty in required_assertions():
        ty_core, _ = elab.elaborate_term(env, parse_term(ty))
        ty_v = kernel.eval_term([], env, ty_core)
        ctx = elab.ElabCtx(env)
        l_core = elab.zonk(ctx, elab.check(ctx, parse_term(lhs), ty_v))
        r_core = elab.zonk(ctx, elab.check(ctx, parse_term(rhs), ty_v))
        ok = kernel.assert_defeq(env, l_core, r_core, ty_core)
        out.append((f"{lhs} ~ {rhs}", ok))
    return out
