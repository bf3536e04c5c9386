#!/usr/bin/env python3
"""Solves exported LP files with scipy's MILP solver and compares the optimum
with the branch-and-bound TC printed by `cachecnn gen --solve`.

usage: milp_crosscheck.py CLI WORKDIR
Exit code 77 when scipy is unavailable.
"""

import os
import re
import subprocess
import sys

try:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix
except ImportError:
    print("scipy not available; skipping")
    sys.exit(77)

SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "maximize": "max", "maximum": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
TOKEN = re.compile(r"\s*(<=|>=|=<|=>|=|<|>|[+-]|[A-Za-z_][\w.\[\]]*:|"
                   r"[0-9.]+(?:[eE][+-]?\d+)?|[A-Za-z_][\w.\[\]]*|inf(?:inity)?)")


def tokens(text):
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = TOKEN.match(text, pos)
        if not m:
            raise ValueError("cannot tokenize: " + text[pos:pos + 20])
        out.append(m.group(1))
        pos = m.end()
    return out


def linear(toks):
    """Parses `[+-] [coef] var ...` into ({var: coef}, constant)."""
    terms, const, i, sign = {}, 0.0, 0, 1.0
    while i < len(toks):
        t = toks[i]
        if t in "+-":
            sign = -sign if t == "-" else sign
            i += 1
            continue
        coef = 1.0
        if re.fullmatch(r"[0-9.]+(?:[eE][+-]?\d+)?", t):
            coef = float(t)
            i += 1
            if i == len(toks) or toks[i] in "+-":
                const += sign * coef
                sign = 1.0
                continue
        terms[toks[i]] = terms.get(toks[i], 0.0) + sign * coef
        sign = 1.0
        i += 1
    return terms, const


def parse(text):
    chunks = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}
    section, sense = None, 1.0
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = SECTIONS.get(line.lower())
        if key:
            if key == "end":
                break
            if key == "max":
                key, sense = "obj", -1.0
            section = key
            continue
        chunks[section].append(line)

    obj_toks = tokens(" ".join(chunks["obj"]))
    if obj_toks and obj_toks[0].endswith(":"):
        obj_toks = obj_toks[1:]
    objective, obj_const = linear(obj_toks)

    rows, current = [], []
    for line in chunks["st"]:
        current += tokens(line)
        if any(t in ("<=", ">=", "=<", "=>", "=", "<", ">") for t in current):
            # The right-hand side may still be on this line or the next.
            if re.fullmatch(r"[0-9.eE+-]+", current[-1]) or current[-1].startswith("inf"):
                rows.append(current)
                current = []
    if current:
        raise ValueError("dangling constraint")
    constraints = []
    for toks in rows:
        if toks[0].endswith(":"):
            toks = toks[1:]
        op = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "=", "<", ">"))
        terms, const = linear(toks[:op])
        rhs_terms, rhs = linear(toks[op + 1:])
        assert not rhs_terms
        kind = {"<=": "le", "=<": "le", "<": "le", ">=": "ge", "=>": "ge", ">": "ge", "=": "eq"}
        constraints.append((terms, kind[toks[op]], rhs - const))

    bounds = {}
    for line in chunks["bounds"]:
        t = line.split()
        if len(t) == 2 and t[1].lower() == "free":
            bounds[t[0]] = (-np.inf, np.inf)
        elif len(t) == 5:
            bounds[t[2]] = (float(t[0]), float(t[4]))
        elif len(t) == 3:
            lo, hi = bounds.get(t[0], (0.0, np.inf))
            v = float(t[2])
            if t[1] in (">=", "=>"):
                lo = v
            elif t[1] in ("<=", "=<"):
                hi = v
            else:
                lo = hi = v
            bounds[t[0]] = (lo, hi)
        else:
            raise ValueError("bad bound: " + line)
    binaries = " ".join(chunks["bin"]).split()
    generals = " ".join(chunks["gen"]).split()
    return sense, objective, obj_const, constraints, bounds, binaries, generals


def solve(text):
    sense, objective, obj_const, constraints, bounds, binaries, generals = parse(text)
    names = []
    seen = set()

    def add(v):
        if v not in seen:
            seen.add(v)
            names.append(v)

    for v in objective:
        add(v)
    for terms, _, _ in constraints:
        for v in terms:
            add(v)
    for v in list(bounds) + binaries + generals:
        add(v)
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for v, a in objective.items():
        c[index[v]] = sense * a
    A = lil_matrix((len(constraints), n))
    lo = np.full(len(constraints), -np.inf)
    hi = np.full(len(constraints), np.inf)
    for r, (terms, kind, rhs) in enumerate(constraints):
        for v, a in terms.items():
            A[r, index[v]] = a
        if kind in ("le", "eq"):
            hi[r] = rhs
        if kind in ("ge", "eq"):
            lo[r] = rhs
    lb, ub = np.zeros(n), np.full(n, np.inf)
    integrality = np.zeros(n)
    for v, (a, b) in bounds.items():
        lb[index[v]], ub[index[v]] = a, b
    for v in binaries:
        lb[index[v]], ub[index[v]] = max(lb[index[v]], 0), min(ub[index[v]], 1)
        integrality[index[v]] = 1
    for v in generals:
        integrality[index[v]] = 1
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi),
               bounds=Bounds(lb, ub), integrality=integrality,
               options={"mip_rel_gap": 1e-9})
    if res.status != 0:
        raise RuntimeError("milp failed: " + res.message)
    return sense * res.fun + obj_const, n, len(constraints)


def main():
    cli, work = sys.argv[1], sys.argv[2]
    os.makedirs(work, exist_ok=True)
    failures = 0
    for flows, index in [(3, 0), (3, 1), (3, 2), (5, 0), (5, 1)]:
        inst = os.path.join(work, f"k{flows}_{index}.txt")
        lp = os.path.join(work, f"k{flows}_{index}.lp")
        out = subprocess.run([cli, "gen", "--out", inst, "--index", str(index), "--solve",
                              "--set", f"flows={flows}"],
                             check=True, capture_output=True, text=True).stdout
        bb = float(re.search(r"^TC (\S+)", out, re.M).group(1))
        census = subprocess.run([cli, "export-lp", "--instance", inst, "--out", lp],
                                check=True, capture_output=True, text=True).stdout
        m = re.search(r"(\d+) variables, (\d+) constraints \(formula: (\d+), (\d+)\)", census)
        with open(lp) as f:
            value, nvars, nrows = solve(f.read())
        ok_census = (nvars, nrows) == (int(m.group(3)), int(m.group(4)))
        # gen prints TC with six decimals.
        ok_value = abs(value - bb) <= 2e-6 + 1e-6 * abs(bb)
        print(f"{'ok  ' if ok_census and ok_value else 'FAIL'} flows={flows} index={index}: "
              f"scipy {value:.6f} vs branch-and-bound {bb:.6f}; "
              f"{nvars} vars / {nrows} rows (formula {m.group(3)} / {m.group(4)})")
        failures += not (ok_census and ok_value)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
