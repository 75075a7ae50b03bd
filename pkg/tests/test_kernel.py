"""Kernel behavior: evaluation, readback, conversion, type checking."""

import random

import pytest

from hpt import corpus, driver, elab, kernel
from hpt.core import App, Global, Id, J, Lam, Level, Refl, Type, Var, alpha_eq, term_size
from hpt.kernel import (
    BudgetExhausted,
    DuplicateName,
    GlobalEnv,
    KernelError,
    KernelTypeError,
    VRefl,
    assert_defeq,
    check_decl,
    conv,
    eval_term,
    normalize,
    step_budget,
)
from hpt.surface import parse_term


@pytest.fixture(scope="module")
def env():
    from tests.conftest import load_corpus_cached

    loaded, _ = load_corpus_cached()
    return loaded


def _elab(env, text, expected=None):
    core, ty = elab.elaborate_term(env, parse_term(text))
    return core, ty


def test_eval_beta(env):
    # (fun x => x) star evaluates to star
    t = App(Lam("x", Var(0), Global("A")), Global("star"))
    v = eval_term([], env, t)
    nf = kernel.readback(0, v, unfold_top=True)
    assert alpha_eq(nf, Global("star"))


def test_eval_j_beta(env):
    core, _ = _elab(env, "J (fun (x : A) (h : star = x) => A) star (refl star)")
    assert alpha_eq(normalize(env, core), Global("star"))


def test_eval_corpus_concat_refl(env):
    core, _ = _elab(env, "concat (refl star) (refl star)")
    assert alpha_eq(normalize(env, core), Refl(Global("star")))


def test_readback_refl(env):
    v = eval_term([], env, Refl(Global("star")))
    assert kernel.readback(0, v) == Refl(Global("star"))


def test_conv_rigid(env):
    assert conv(0, kernel.VType(Level(0)), kernel.VType(Level(0)))
    assert not conv(0, kernel.VType(Level(0)), kernel.VType(Level(1)))


def test_conv_eh_refl(env):
    core, _ = _elab(env, "EH (refl (refl star)) (refl (refl star))")
    expected, _ = _elab(env, "refl (refl (refl star))")
    assert conv(0, eval_term([], env, core), eval_term([], env, expected))


def test_infer_type_refl(env):
    core, ty = _elab(env, "refl star")
    inferred = kernel.infer_type([], env, core)
    want = eval_term([], env, Id(Global("A"), Global("star"), Global("star")))
    assert conv(0, inferred, want)


def test_infer_type_application_error(env):
    with pytest.raises(KernelTypeError):
        kernel.infer_type([], env, App(Global("star"), Global("star")))


def test_check_decl_axiom_and_duplicate(env):
    fresh = GlobalEnv()
    from hpt.core import CoreDecl

    fresh = check_decl(fresh, CoreDecl("B", Type(Level(0)), None))
    assert "B" in fresh
    with pytest.raises(DuplicateName):
        check_decl(fresh, CoreDecl("B", Type(Level(0)), None))


def test_check_decl_body_mismatch(env):
    from hpt.core import CoreDecl

    bad = CoreDecl("bad", Global("A"), Global("A"))
    with pytest.raises(KernelTypeError):
        check_decl(env, bad)


def test_assert_defeq_reflexivity(env):
    l, _ = _elab(env, "refl star")
    ty, _ = _elab(env, "star = star")
    assert assert_defeq(env, l, l, ty)


def test_assert_defeq_checks_sides(env):
    l, _ = _elab(env, "refl star")
    ty, _ = _elab(env, "A")
    with pytest.raises(KernelTypeError):
        assert_defeq(env, l, l, ty)


def test_step_budget_reports_runaway(env):
    core, _ = _elab(env, "syllepsis")
    with pytest.raises(BudgetExhausted):
        with step_budget(50):
            normalize(env, core)


# ---------------------------------------------------------------------------
# Corpus-wide properties


def test_readback_eval_idempotent_glued(env):
    for entry in env:
        if entry.body_core is None:
            continue
        nf1 = kernel.readback(0, eval_term([], env, entry.body_core))
        nf2 = kernel.readback(0, eval_term([], env, nf1))
        assert alpha_eq(nf1, nf2), entry.name


def test_readback_eval_idempotent_unfolded_small(env):
    for entry in env:
        if entry.body_core is None:
            continue
        nf1 = normalize(env, entry.body_core)
        if term_size(nf1) > 120_000:
            continue
        nf2 = normalize(env, nf1)
        assert alpha_eq(nf1, nf2), entry.name


def test_conv_equivalence_on_corpus_values(env):
    values = []
    for entry in env:
        values.append(entry.type_value)
        if entry.body_value is not None:
            values.append(entry.body_value)
    rng = random.Random(7)
    sample = [rng.choice(values) for _ in range(60)]
    for v in sample:
        assert conv(0, v, v)  # reflexive
    for _ in range(60):
        a, b = rng.choice(sample), rng.choice(sample)
        assert conv(0, a, b) == conv(0, b, a)  # symmetric
    for _ in range(60):
        a, b, c = rng.choice(sample), rng.choice(sample), rng.choice(sample)
        if conv(0, a, b) and conv(0, b, c):
            assert conv(0, a, c)  # transitive


def test_subject_reduction_on_corpus(env):
    for entry in env:
        if entry.body_core is None:
            continue
        nf = kernel.readback(0, eval_term([], env, entry.body_core))
        t1 = kernel.infer_type([], env, entry.body_core)
        t2 = kernel.infer_type([], env, nf)
        assert conv(0, t1, t2), entry.name


def test_j_beta_random_instances(env):
    rng = random.Random(20260809)
    current = env
    passed = 0
    for i in range(100):
        depth = rng.choice([0, 1, 2])
        pt = "star"
        ty = "A"
        for _ in range(depth):
            ty = f"({pt} = {pt})"
            pt = f"(refl {pt})"
        kind = rng.choice(["const", "moveable", "flipped"])
        if kind == "const":
            body_ty = "A"
            base = "star"
        elif kind == "moveable":
            body_ty = f"{pt} = x"
            base = f"refl {pt}"
        else:
            body_ty = f"x = {pt}"
            base = f"refl {pt}"
        motive = f"(fun (x : {ty}) (h : {pt} = x) => {body_ty})"
        j_term = f"J {motive} ({base}) (refl {pt})"
        if kind == "const":
            assert_ty = "A"
        else:
            assert_ty = f"{pt} = {pt}"
        ty_core, _ = _elab(current, assert_ty)
        l_core, _ = _elab(current, j_term)
        r_core, _ = _elab(current, f"({base})")
        assert assert_defeq(current, l_core, r_core, ty_core), j_term
        passed += 1
    assert passed == 100


def test_mutation_never_crashes(env):
    from hpt.core import replace_at, subterms, term_size

    rng = random.Random(99)
    bodies = [e for e in env if e.body_core is not None]
    outcomes = {"type_error": 0, "still_checks": 0}
    replacements = [
        Var(0),
        Type(Level(0)),
        Refl(Global("star")),
        Global("A"),
        Global("star"),
    ]
    for i in range(50):
        entry = rng.choice(bodies)
        size = term_size(entry.body_core)
        pos = rng.randrange(size)
        mutated = replace_at(entry.body_core, pos, rng.choice(replacements))
        try:
            with step_budget(10**7):
                kernel._check_against([], env, mutated, entry.type_value, [], ())
            outcomes["still_checks"] += 1
        except KernelError:
            outcomes["type_error"] += 1
    assert sum(outcomes.values()) == 50


def test_pretty_reelaborate_round_trip_on_normal_forms(env):
    """Printing a normal-form corpus term reparses and re-elaborates to an
    alpha-equal term whose type still matches the declaration."""
    from hpt.core import pretty

    checked = 0
    for entry in env:
        if entry.body_core is None:
            continue
        nf = normalize(env, entry.body_core)
        if term_size(nf) > 50_000:
            continue
        text = pretty(nf)
        core, ty_core = elab.elaborate_term(env, parse_term(text))
        assert alpha_eq(core, nf), entry.name
        assert conv(0, eval_term([], env, ty_core), entry.type_value), entry.name
        checked += 1
    assert checked >= 40


def test_pretty_reelaborate_round_trip_on_types(env):
    from hpt.core import pretty
    from hpt.kernel import VType

    for entry in env:
        nf_ty = normalize(env, entry.type_core)
        text = pretty(nf_ty)
        core, _ = elab.elaborate_term(env, parse_term(text))
        assert alpha_eq(core, nf_ty), entry.name
