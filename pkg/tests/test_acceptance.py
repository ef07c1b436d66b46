"""End-to-end acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (visible with ``-s``
or in the terminal summary) before asserting.
"""

import math
import time

import numpy as np
import pytest
from test_spectral import KELDYSH_FIXTURE

from slroots.discretize import discretize, interpolate
from slroots.harness import export, run
from slroots.problem import BUILTIN_PROBLEMS, builtin_problem
from slroots.spectral import (
    analyze,
    bitsadze_witness,
    completeness_residual,
    decompose,
    keldysh_lab,
    make_rng,
    random_perturbation,
    resolvent_scan,
)

ONE_D = ["neumann_1d", "robin_1d", "zaremba_1d", "convection_1d"]
TWO_D = ["zaremba_2d", "convection_2d", "dbar_noncoercive_2d"]


def _res(name):
    # N <= 400 throughout
    return 200 if name in ONE_D else 16


@pytest.fixture
def verdict(capsys, request):
    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        with capsys.disabled():
            print("\n" + line)
        request.node.user_properties.append(("verdict", line))
        assert ok, line

    return emit


def test_criterion_1_analytic_oracle(verdict):
    t0 = time.perf_counter()
    neu = run({"problem": "neumann_1d", "params": {"a00": 1}, "resolution": 200, "degree": 2})
    elapsed = time.perf_counter() - t0
    zar = run({"problem": "zaremba_1d", "resolution": 200, "degree": 2})
    k = np.arange(10)
    err_n = np.max(np.abs(neu.eigenvalues()[:10] - (1 + (k * np.pi) ** 2)) / (1 + (k * np.pi) ** 2))
    exact_z = ((k + 0.5) * np.pi) ** 2
    err_z = np.max(np.abs(zar.eigenvalues()[:10] - exact_z) / exact_z)
    ok = err_n < 1e-3 and err_z < 1e-3 and elapsed < 10
    verdict(1, ok, f"neumann rel err {err_n:.2e}, zaremba rel err {err_z:.2e}, runtime {elapsed:.2f}s")


def test_criterion_2_sector_containment(verdict):
    t0 = time.perf_counter()
    names = ONE_D + TWO_D
    bases = {n: discretize(builtin_problem(n), _res(n), 1) for n in names}
    rng = make_rng(2)
    worst, bad, cs = -np.inf, 0, []
    for i in range(50):
        name = names[i % len(names)]
        c = float(rng.uniform(0.02, 0.98))
        sys = random_perturbation(bases[name], c, rng)
        rep = analyze(sys)
        cs.append(rep.c)
        excess = np.max(np.abs(np.angle(rep.eigenvalues))) - math.asin(rep.c)
        worst = max(worst, excess)
        bad += int(np.sum(np.abs(np.angle(rep.eigenvalues)) > math.asin(rep.c) + 1e-8))
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and 0 < min(cs) and max(cs) < 1 and elapsed < 120
    verdict(2, ok, f"50 perturbations, violations {bad}, max(|arg|-arcsin c) {worst:.2e}, runtime {elapsed:.1f}s")


def test_criterion_3_resolvent_bounds(verdict):
    rays = [math.pi / 6, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi]
    radii = np.geomspace(0.5, 1e5, 20)
    worst_bound, worst_exact, count = -np.inf, 0.0, 0
    for name, params in [("neumann_1d", {}), ("zaremba_1d", {}), ("robin_1d", {}), ("zaremba_2d", {}), ("convection_2d", {"bx": 0})]:
        sys = discretize(builtin_problem(name, params), _res(name) // 2, 1)
        assert not np.any(sys.D)
        data = decompose(sys)
        w = data.spectrum.eigenvalues
        for th in rays:
            for s in resolvent_scan(sys, th, radii, data=data).samples:
                exact = 1 / np.min(np.abs(w - s.lam))
                worst_exact = max(worst_exact, abs(s.norm - exact) / exact)
                worst_bound = max(worst_bound, s.norm / s.bound - 1)
                count += 1
    ok = worst_bound <= 1e-9 and worst_exact <= 1e-9
    verdict(3, ok, f"{count} samples, max norm/bound-1 {worst_bound:.2e}, max rel dev from exact {worst_exact:.2e}")


def test_criterion_4_schatten_decay(verdict):
    one = analyze(discretize(builtin_problem("neumann_1d", {"a00": 1}), 400, 1), fit_window=(10, 50))
    two = analyze(discretize(builtin_problem("convection_2d", {"bx": 0}), 40, 1), fit_window=(10, 50))
    ok = abs(one.decay_exponent + 2) <= 0.1 and abs(two.decay_exponent + 1) <= 0.15
    verdict(4, ok, f"1D exponent {one.decay_exponent:.4f} (target -2 +- 0.1), 2D exponent {two.decay_exponent:.4f} (target -1 +- 0.15)")


def test_criterion_5_l0_isometry(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for name in BUILTIN_PROBLEMS:
        sys = discretize(builtin_problem(name), _res(name), 1)
        X = rng.standard_normal((sys.N, 100)) + 1j * rng.standard_normal((sys.N, 100))
        G = sys.K0 @ X
        dual = np.sqrt(np.real(np.sum(G.conj() * np.linalg.solve(sys.K0, G), axis=0)))
        energy = np.sqrt(np.real(np.sum(X.conj() * (sys.K0 @ X), axis=0)))
        worst = max(worst, float(np.max(np.abs(dual - energy) / energy)))
    verdict(5, worst <= 1e-12, f"{len(BUILTIN_PROBLEMS)} builtins x 100 vectors, max rel defect {worst:.2e}")


def m_ladder(N):
    """Powers of two below N, then N itself."""
    out, m = [], 1
    while m < N:
        out.append(m)
        m *= 2
    return out + [N]


def test_criterion_6_completeness(verdict):
    worst_full, monotone, defective = 0.0, True, []
    cases = [(n, {}) for n in BUILTIN_PROBLEMS] + [("dbar_noncoercive_2d", {"a": 0.3}), ("zaremba_2d", {"eps": 0.2})]
    for name, params in cases:
        sys = discretize(builtin_problem(name, params), _res(name), 1)
        data = decompose(sys)
        if data.chain_lengths.max() > 1:
            defective.append(name)
            continue
        target = interpolate(lambda x: float(np.sum(np.asarray(x) ** 2)) + 0.5, sys.basis)
        rows = completeness_residual(sys, target, m_ladder(sys.N), data=data)
        last = rows[-1]
        worst_full = max(worst_full, last.dual, last.l2, last.sl)
        for attr in ("dual", "l2", "sl"):
            vals = [getattr(r, attr) for r in rows]
            monotone &= all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))
    ok = worst_full <= 1e-8 and monotone and not defective
    verdict(6, ok, f"{len(cases)} systems, max full-expansion residual {worst_full:.2e}, monotone {monotone}, defective {defective}")


def test_criterion_7_keldysh(verdict):
    t0 = time.perf_counter()
    real = keldysh_lab(128, 2, 0.0, [0.45], seed=KELDYSH_FIXTURE["seed"])
    counts = [
        keldysh_lab(n, 2, 0.4, [0.45], seed=KELDYSH_FIXTURE["seed"]).outside_counts[0] for n in (64, 128, 256)
    ]
    elapsed = time.perf_counter() - t0
    ok = real.max_abs_imag <= 1e-10 and max(counts) <= KELDYSH_FIXTURE["outside"] and elapsed < 60
    verdict(7, ok, f"max|Im| at delta 0 {real.max_abs_imag:.1e}, outside counts {counts} <= fixture {KELDYSH_FIXTURE['outside']}, runtime {elapsed:.1f}s")


def test_criterion_8_noncoercive_example(verdict):
    base = analyze(discretize(builtin_problem("dbar_noncoercive_2d"), 24, 1), fit_window=(10, 50))
    w = base.eigenvalues
    real_pos = bool(np.all(np.abs(w.imag) <= 1e-8 * np.abs(w)) and np.all(w.real > 0))
    pert = analyze(discretize(builtin_problem("dbar_noncoercive_2d", {"a": 0.5}), 24, 1))
    sector = pert.c < 1 and pert.violations == 0
    preds = base.schatten_predictions
    ok = real_pos and sector
    verdict(
        8, ok,
        f"L0 spectrum real positive {real_pos}; with drift c={pert.c:.3f}, violations {pert.violations}; "
        f"decay {base.decay_exponent:.3f} vs predictions {preds['predicted_exponents']} (closest: {preds['closest']}, informational)",
    )


def test_criterion_9_bitsadze(verdict):
    rows = bitsadze_witness(2.0, [5, 10, 20, 40], 64)
    l2 = [r.l2_norm for r in rows]
    dx = [r.sup_dx for r in rows]
    vanish = max(r.boundary_max for r in rows)
    ok = all(b > a for a, b in zip(l2, l2[1:])) and all(b < a for a, b in zip(dx, dx[1:])) and vanish <= 1e-12
    verdict(9, ok, f"L2 norms {[f'{v:.3g}' for v in l2]}, sup|du/dx| {[f'{v:.3g}' for v in dx]}, max on half-circle {vanish:.1e}")


def test_criterion_10_determinism(verdict, tmp_path):
    cfg = {
        "problem": "zaremba_2d",
        "params": {"eps": 0.1},
        "resolution": 10,
        "perturbation": {"c": 0.3},
        "scans": {"rays": [math.pi / 2], "radii": [1, 10]},
        "completeness": {"m_list": [4, 16]},
        "seed": 77,
    }
    export(run(cfg), "json", tmp_path / "a")
    export(run(cfg), "json", tmp_path / "b")
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    verdict(10, a == b, f"two runs, {len(a)} bytes each, byte-identical {a == b}")
