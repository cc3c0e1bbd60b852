#!/usr/bin/env python3
"""Smoke test for the setfn_py extension module.

Builds nothing itself: it expects `cargo build -p setfn-py` (or a release
build) to have produced the cdylib, locates it under target/, makes it
importable as `setfn_py`, and exercises every exported function.

Run from the repository root (or anywhere inside it):

    cargo build -p setfn-py
    python3 python/smoke_test.py
"""

import importlib
import pathlib
import shutil
import sys
import tempfile


def repo_root() -> pathlib.Path:
    here = pathlib.Path(__file__).resolve()
    for parent in here.parents:
        if (parent / "Cargo.toml").is_file() and (parent / "crates").is_dir():
            return parent
    sys.exit("could not locate the repository root above " + str(here))


def find_cdylib(root: pathlib.Path) -> pathlib.Path:
    candidates = []
    for profile in ("release", "debug"):
        for stem in ("libsetfn_py.so", "libsetfn_py.dylib", "setfn_py.dll"):
            p = root / "target" / profile / stem
            if p.is_file():
                candidates.append(p)
    if not candidates:
        sys.exit(
            "setfn_py cdylib not found under target/{release,debug}; "
            "run `cargo build -p setfn-py` first"
        )
    # Prefer the most recently built artifact.
    return max(candidates, key=lambda p: p.stat().st_mtime)


def import_module(cdylib: pathlib.Path, scratch: pathlib.Path):
    ext = ".pyd" if cdylib.suffix == ".dll" else ".so"
    target = scratch / ("setfn_py" + ext)
    shutil.copy2(cdylib, target)
    sys.path.insert(0, str(scratch))
    return importlib.import_module("setfn_py")


def main() -> None:
    root = repo_root()
    with tempfile.TemporaryDirectory() as scratch:
        m = import_module(find_cdylib(root), pathlib.Path(scratch))

        # Canonical printing normalizes spacing and numerals.
        assert m.canonical("forall X . ( X = X )") == "forall X . X = X"
        assert m.canonical("empty+ in omega") == "1 in omega"

        # Well-formedness: a conjunctor body must be a mapping atom.
        assert m.wff_violations("/\\_{a in omega} . f{a+} : a |-> a") == []
        bad = m.wff_violations("/\\_{a in omega} . a = a")
        assert bad and any("conjunctor" in v for v in bad), bad

        # Axiom registry: twenty axioms, each with printable text.
        names = m.axiom_names()
        assert len(names) == 20, names
        assert "SUMF" in names and "INF" in names, names
        sumf = m.axiom_text("SUMF")
        assert sumf.startswith("forall X != empty ."), sumf
        try:
            m.axiom_text("NOPE")
        except ValueError:
            pass
        else:
            sys.exit("unknown axiom name was accepted")

        # Proof checking: a three-step script and a broken variant.
        good = (
            "arbitrary c0 : Set\n"
            "goal : forall X . (X = empty => X = empty)\n"
            "1. discharge : c0 = empty\n"
            "2. discharge [1 1] : c0 = empty => c0 = empty\n"
            "3. all-i [2] {c0 X} : forall X . (X = empty => X = empty)\n"
        )
        accepted, detail = m.check_script(good)
        assert accepted, detail
        broken = good.replace("3. all-i [2]", "3. all-i [1]")
        accepted, detail = m.check_script(broken)
        assert not accepted and "step 3" in detail, detail

        # Corpus scripts go through the same entry point.
        omega_script = (root / "corpus" / "identity_on_omega.tfp").read_text()
        accepted, detail = m.check_script(omega_script)
        assert accepted, detail

        # Finite-universe evaluation and the twenty-axiom audit.
        uni = (
            "set s01 { 0 1 }\n"
            "fn swap dom s01 { 0 -> 1 ; 1 -> 0 }\n"
        )
        assert m.eval_in_universe(uni, "swap : s01 ->> s01") is True
        assert m.eval_in_universe(uni, "swap : 0 |-> 0") is False
        audit = dict(m.audit_universe(uni))
        assert len(audit) == 20, audit
        assert audit["EXT"] is True
        assert audit["INF"] is False  # finite universes falsify infinity

    print("smoke test passed: all setfn_py entry points behave")


if __name__ == "__main__":
    main()
