"""Smoke test for the emt_py extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/emt_py-*.whl

then run `python python/smoke_test.py`.
"""

import json
import sys

import emt_py


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    return cond


def main():
    results = []

    em = emt_py.Theory.bundled("em")
    bh = emt_py.Theory.bundled("em_bessel_hagen")
    want = emt_py.reference("em")
    results.append(check(bh.equal(bh.noether_emt(), want), "Maxwell: Noether with gauge completion equals reference"))
    results.append(check(em.equal(em.hilbert_emt(), want), "Maxwell: metric variation equals reference"))

    kg = emt_py.Theory.bundled("kg")
    results.append(check(kg.equal(kg.noether_emt(), kg.hilbert_emt()), "Klein-Gordon: both methods agree"))
    report = json.loads(kg.oracle_compare(kg.noether_emt(), kg.hilbert_emt(), trials=5))
    results.append(check(report["verdict"] == "equal", "Klein-Gordon: oracle agrees"))

    gb = emt_py.Theory.bundled("gauss_bonnet")
    t = gb.hilbert_emt().substitute({"A": "1/4", "B": "-1", "C": "1/4"})
    ref = emt_py.reference("gauss_bonnet")
    d = gb.difference(t, ref)
    results.append(check(not d.is_zero(), "curvature squared: metric variation differs from reference (%d terms)" % len(d)))
    report = json.loads(gb.oracle_compare(t, ref, trials=20))
    results.append(check(report["verdict"] == "unequal" and "witness" in report, "curvature squared: oracle finds a witness"))

    reports = json.loads(gb.check(ref, ["symmetric", "traceless", "gauge_invariant", "conserved"]))
    results.append(check(all(r["verdict"] == "pass" for r in reports), "reference tensor: all properties hold"))

    for name in ["kg", "em", "fierz_pauli", "gauss_bonnet"]:
        r = emt_py.Theory.bundled(name).noether_identity_residual()
        results.append(check(r.is_zero(), "%s: Noether identity residual is zero" % name))

    zero = emt_py.Theory("field A {rank:1}\nlagrangian = d[a] A[b] d[^a] A[^b] - d[c] A[e] d[^c] A[^e]").lagrangian()
    results.append(check(str(zero) == "0", "relabeled copies cancel"))

    back = emt_py.Expr.from_json(want.to_json())
    results.append(check(em.equal(back, want) and back.free_indices() == ["^ga", "^rh"], "JSON round trip"))

    try:
        emt_py.Theory("lagrangian = ")
        results.append(check(False, "parse errors raise"))
    except emt_py.EmtError:
        results.append(check(True, "parse errors raise"))

    ok = all(results)
    print("%d/%d passed" % (sum(results), len(results)))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
