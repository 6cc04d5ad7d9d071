"""The twelve acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import time

import numpy as np
import pytest

from lvsimplex.classify import check_f_monotone, check_injective, check_m0, check_m1
from lvsimplex.cli import main
from lvsimplex.dynamics import (find_fixed_points, find_periodic, iterate, starts_across_faces,
                                surjectivity_probe)
from lvsimplex.operators import (SkewMatrix, compose, cubic, mix, piecewise_m1,
                                 piecewise_periodic2, power_attract, power_repel,
                                 quadratic_from_matrix, validate_lv)
from lvsimplex.simplex import (Face, barycenter, face_center, iter_faces, max_index_set,
                               sample_points, sup_distance, support, vertex)

EPS_GRID = (0.25, 0.5, 1.0)
ELL_GRID = (1, 2, 3)


def tie_starts(m: int) -> np.ndarray:
    """Starts whose maximum is attained exactly on several coordinates."""
    rng = np.random.default_rng(m)
    out = []
    for top in range(2, m + 1):
        base = np.array([2.0] * top + [1.0 + 0.5 * (i % 2) for i in range(m - top)])
        base /= base.sum()
        for _ in range(3):
            out.append(base[rng.permutation(m)])
    return np.array(out)


# ---------------------------------------------------------------------------

def test_01_lv_validity(record):
    t0 = time.perf_counter()
    ops = []
    rng = np.random.default_rng(101)
    for i in range(20):
        ops.append(quadratic_from_matrix(SkewMatrix.random(2 + i % 4, rng)))
    for m in (3, 4):
        for eps in EPS_GRID:
            for ell in ELL_GRID:
                ops += [power_attract(m, eps, ell), power_repel(m, eps, ell)]
    ops += [cubic(m) for m in (2, 3, 4)]
    ops += [piecewise_periodic2(), piecewise_m1()]
    failures, worst = [], 0.0
    for V in ops:
        rep = validate_lv(V, n_samples=1000, seed=1)
        worst = max(worst, rep.worst_cond3_residual)
        if not rep.passed or rep.worst_cond3_residual > 1e-10:
            failures.append(V.label)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed <= 60
    record(1, ok, f"{len(ops)} operators, failures={failures}, worst cond3 residual "
                  f"{worst:.2e}, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def attract_runs():
    """Criterion 2 trajectories, reused by criterion 3."""
    t0 = time.perf_counter()
    runs = []
    for m in range(2, 7):
        for eps in EPS_GRID:
            for ell in ELL_GRID:
                V = power_attract(m, eps, ell)
                rng = np.random.default_rng([m, int(eps * 100), ell])
                starts = np.vstack([starts_across_faces(m, 200, rng), tie_starts(m)])
                for x0 in starts:
                    runs.append(((m, eps, ell), x0, iterate(V, x0)))
    return runs, time.perf_counter() - t0


def test_02_convergence_and_limit(record, attract_runs):
    runs, elapsed = attract_runs
    not_conv = [r for r in runs if not r[2].converged]
    worst = 0.0
    wrong = 0
    for _, x0, traj in runs:
        if not traj.converged:
            continue
        d = sup_distance(traj.limit, face_center(max_index_set(x0)))
        worst = max(worst, d)
        wrong += d > 1e-6
    ok = not not_conv and wrong == 0 and elapsed <= 300
    record(2, ok, f"{len(runs)} trajectories, unconverged={len(not_conv)}, wrong limit={wrong}, "
                  f"worst distance {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_03_max_set_preserved(record, attract_runs):
    runs, _ = attract_runs
    violations = 0
    for _, x0, traj in runs:
        M = max_index_set(x0)
        if any(max_index_set(p) != M for p in traj.points):
            violations += 1
        elif traj.converged and support(traj.limit, 1e-6) != M:
            violations += 1
    ok = violations == 0
    record(3, ok, f"{len(runs)} trajectories, violations={violations}")
    assert ok


def test_04_repel_limit(record):
    bad_limit, bad_min, worst, n = 0, 0, 0.0, 0
    grid = [(e, l) for e in EPS_GRID for l in ELL_GRID]
    for m in range(2, 6):
        rng = np.random.default_rng(400 + m)
        starts = sample_points(Face.full(m), 100, rng, interior=True)
        for i, x0 in enumerate(starts):
            eps, ell = grid[i % len(grid)]
            traj = iterate(power_repel(m, eps, ell), x0)
            n += 1
            if not traj.converged or sup_distance(traj.limit, barycenter(m)) > 1e-6:
                bad_limit += 1
            else:
                worst = max(worst, sup_distance(traj.limit, barycenter(m)))
            mins = traj.points.min(axis=1)
            if np.any(np.diff(mins) < -1e-12):
                bad_min += 1
    ok = bad_limit == 0 and bad_min == 0
    record(4, ok, f"{n} trajectories, wrong limit={bad_limit}, min-coordinate decreases="
                  f"{bad_min}, worst distance {worst:.2e}")
    assert ok


def test_05_fixed_point_census(record):
    details, ok = [], True
    for m, expected in ((3, 7), (4, 15)):
        fps = find_fixed_points(power_attract(m, 1.0, 1))
        centers = np.array([face_center(f) for f in iter_faces(m)])
        dist = [np.abs(centers - fp.point).max(axis=1).min() for fp in fps]
        matched = {int(np.abs(centers - fp.point).max(axis=1).argmin()) for fp in fps}
        good = len(fps) == expected and max(dist) <= 1e-8 and len(matched) == expected
        ok &= good
        details.append(f"m={m}: {len(fps)} points (want {expected}), max dist {max(dist):.1e}")
    record(5, ok, "; ".join(details))
    assert ok


def _is_edge_center(p) -> bool:
    p = np.asarray(p)
    nz = p[p > 0]
    return nz.size == 2 and np.allclose(nz, 0.5, atol=0, rtol=0)


def test_06_quadratic_rigidity(record):
    rng = np.random.default_rng(606)
    bad = []
    for i in range(50):
        m = 2 + i % 3
        while True:
            A = SkewMatrix.random(m, rng)
            if np.abs(A.entries).max() >= 0.1:
                break
        v = check_m1(quadratic_from_matrix(A), seed=i)
        if not (v.failed and _is_edge_center(v.witness.points[0])):
            bad.append(i)
    zero = quadratic_from_matrix(np.zeros((3, 3)))
    zero_ok = check_m1(zero).passed and check_m0(zero).passed
    ok = not bad and zero_ok
    record(6, ok, f"50 nonzero matrices, without edge-center Fail: {bad}; A=0 passes both: "
                  f"{zero_ok}")
    assert ok


def test_07_f_monotone_verdicts(record):
    att = check_f_monotone(power_attract(3, 1.0, 1), n_pairs=10_000, seed=7)
    att2 = check_f_monotone(power_attract(4, 0.5, 2), n_pairs=10_000, seed=7)
    rep = check_f_monotone(power_repel(3, 1.0, 1), n_pairs=10_000, seed=7)
    cub = check_f_monotone(cubic(3), n_pairs=10_000, seed=7)
    att_ok = all(v.passed and v.details["min_inner_product"] >= -1e-12 for v in (att, att2))
    rep_ok = rep.failed and rep.witness.value < -1e-9
    cw = cub.witness
    cub_ok = (cub.failed and np.array_equal(cw.points[0], vertex(3, 1))
              and np.array_equal(cw.points[1], vertex(3, 2)) and abs(cw.value + 1) <= 1e-12)
    ok = att_ok and rep_ok and cub_ok
    record(7, ok, f"attract min {min(att.details['min_inner_product'], att2.details['min_inner_product']):.1e}; "
                  f"repel witness {rep.witness.value if rep.witness else None}; "
                  f"cubic witness {cw.value if cw else None} at (e1,e2)={cub_ok}")
    assert ok


def test_08_periodicity_and_collisions(record):
    pp2 = piecewise_periodic2()
    orbits = find_periodic(pp2, r_max=2)
    target = np.array([[0.25, 0.75], [0.75, 0.25]])
    found = [o for o in orbits if o.period == 2 and np.abs(o.orbit - target).max() <= 1e-10
             and o.residual <= 1e-10]
    inj = check_injective(pp2)
    coll_ok = inj.failed and np.abs(np.array(inj.witness.image) - [0.9, 0.1]).max() <= 1e-12
    m1op = piecewise_m1()
    m1 = check_m1(m1op)
    inj1 = check_injective(m1op)
    m1_ok = (m1.passed and inj1.failed
             and np.abs(np.array(inj1.witness.image) - [1 / 3, 2 / 3]).max() <= 1e-12)
    ok = bool(found) and coll_ok and m1_ok
    record(8, ok, f"orbit recovered={bool(found)} ({len(orbits)} period-2 orbits total); "
                  f"collision image {inj.witness.image if inj.witness else None}; "
                  f"M1 piecewise: m1={m1.kind}, collision image "
                  f"{inj1.witness.image if inj1.witness else None}")
    assert ok


def test_09_surjectivity(record):
    t0 = time.perf_counter()
    reps = {V.label: surjectivity_probe(V, 100, seed=9)
            for V in (power_attract(3, 1.0, 1), piecewise_periodic2())}
    elapsed = time.perf_counter() - t0
    ok = all(r.success_rate == 1.0 and r.worst_residual <= 1e-10 for r in reps.values())
    ok &= elapsed <= 120
    record(9, ok, "; ".join(f"{k}: rate {r.success_rate}, worst {r.worst_residual:.1e}"
                            for k, r in reps.items()) + f"; {elapsed:.1f}s")
    assert ok


def test_10_closure(record):
    bad = []
    for make, check in ((power_attract, check_m1), (power_repel, check_m0)):
        a, b = make(3, 1.0, 1), make(3, 0.5, 2)
        for W in (compose(a, b), compose(b, a), mix(0.3, a, b), mix(0.7, a, b)):
            if not (check(W).passed and validate_lv(W).passed):
                bad.append(W.label)
    ok = not bad
    record(10, ok, f"16 checks over compose/mix, failures={bad}")
    assert ok


def test_11_no_periodic_orbits(record):
    counts = {m: len(find_periodic(power_attract(m, 1.0, 1), r_max=4)) for m in (2, 3)}
    ok = all(c == 0 for c in counts.values())
    record(11, ok, f"orbits found per m: {counts}")
    assert ok


CLI_CONFIG = """
seed = 12
out = "run"

[operator]
family = "power_attract"
m = 3
eps = 0.5
ell = 2

[simulate]
starts = [[0.5, 0.3, 0.2], [0.4, 0.4, 0.2]]

[classify]
budget = 40

[periodic]
r_max = 2
grid_density = 6

[preimage]
targets = [[0.2, 0.3, 0.5]]

[surjectivity]
n_targets = 12
"""


def _run_all(tmp, monkeypatch):
    import json
    tmp.mkdir()
    (tmp / "run.toml").write_text(CLI_CONFIG)
    monkeypatch.chdir(tmp)
    codes = {}
    for cmd in ("simulate", "classify", "fixed-points", "periodic", "preimage",
                "surjectivity"):
        codes[cmd] = main([cmd, "--config", "run.toml", "--out", f"run/{cmd}"])
    codes["plot"] = main(["plot", "--config", "run.toml", "--out", "run/plot",
                          "--csv", "run/simulate/trajectory_001.csv"])
    files = {}
    for p in sorted((tmp / "run").rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name == "manifest.json":
                doc = json.loads(data)
                doc.pop("duration_seconds")
                data = json.dumps(doc, sort_keys=True).encode()
            files[str(p.relative_to(tmp))] = data
    return codes, files


def test_12_determinism(record, tmp_path, monkeypatch):
    codes_a, files_a = _run_all(tmp_path / "a", monkeypatch)
    codes_b, files_b = _run_all(tmp_path / "b", monkeypatch)
    differing = sorted(k for k in files_a if files_a.get(k) != files_b.get(k))
    ok = (codes_a == codes_b and all(c == 0 for c in codes_a.values())
          and files_a.keys() == files_b.keys() and not differing)
    record(12, ok, f"{len(codes_a)} commands, {len(files_a)} files compared, "
                   f"differing={differing}, exit codes={sorted(set(codes_a.values()))}")
    assert ok
