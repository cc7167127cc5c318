"""Exit criteria for the package.  Criteria 4 and 6 run full Monte Carlo
campaigns and take a few minutes on one core (``-m "not slow"`` skips them).
"""

import time
from fractions import Fraction

import pytest

from convbounds.bounds import BurstQuery, ber_low, ber_up, curve, p_burst
from convbounds.cli import main
from convbounds.codec import GeneratorSpec, build_trellis
from convbounds.simulator import ChannelConfig, run_campaign
from convbounds.spectrum import active_distances, compute_spectrum, oracle_spectrum, summarize

from oracles import exact_p_burst, feedforward_free_distance, trellis_free_distance

M3_CODES = ["(13,17)", "(13,15)"]
FIG_FRAMES = 200_000
M6_FRAMES = 100_000


def bounds_for(code, jmax=40, margin=10):
    spec = GeneratorSpec.parse(code)
    t = build_trellis(spec)
    w0 = min(active_distances(t, jmax).values())
    sp = compute_spectrum(t, jmax, w0 + margin)
    return spec, t, sp


@pytest.mark.parametrize("code", M3_CODES)
def test_c1_spectrum_oracle_equivalence(code, criterion):
    t = build_trellis(GeneratorSpec.parse(code))
    t0 = time.perf_counter()
    dp = compute_spectrum(t, 12, None)
    ex = oracle_spectrum(t, 12)
    elapsed = time.perf_counter() - t0
    triples = lambda s: {(j, w, c) for j, e in s.per_length.items() for w, c in e}
    ok = triples(dp) == triples(ex) and elapsed < 60
    assert criterion(f"C1 spectrum == oracle {code}", ok,
                     f"{len(triples(dp))} (j,w,N) triples, {elapsed:.2f}s")


@pytest.mark.parametrize("code", M3_CODES)
def test_c2_free_distance(code, criterion):
    spec = GeneratorSpec.parse(code)
    t = build_trellis(spec)
    w_min = summarize(compute_spectrum(t, 12, None)).w_min
    brute = trellis_free_distance(t, 12)
    poly = feedforward_free_distance(spec.polys_octal, 12 - spec.m)
    ok = w_min == brute == poly
    assert criterion(f"C2 free distance {code}", ok,
                     f"w_min={w_min} brute(inputs<=12)={brute} polynomial={poly}")


def test_c3_formula_fidelity(criterion):
    worst = 0.0
    t0 = time.perf_counter()
    for p in ("0.01", "0.1", "0.3"):
        for s in range(1, 9):
            for w in range(1, 2 * s + 1):
                exact = float(exact_p_burst(s, w, Fraction(p)))
                got = p_burst(BurstQuery(s, w, float(p)))
                worst = max(worst, abs(got - exact) / exact)
    ok = worst <= 1e-10
    assert criterion("C3 log-domain burst probability vs exact rational", ok,
                     f"max rel err {worst:.2e} (tol 1e-10), {time.perf_counter() - t0:.1f}s")


@pytest.mark.slow
@pytest.mark.parametrize("code, p", [("(13,17)", 0.02), ("(13,17)", 0.05), ("(13,15)", 0.05)])
def test_c4_monte_carlo_sandwich(code, p, criterion):
    spec, t, sp = bounds_for(code)
    lo, up = ber_low(p, summarize(sp), spec.m, spec.n), ber_up(p, sp)
    r = run_campaign(spec, ChannelConfig(p, seed=20240), FIG_FRAMES, 1000, trellis=t)
    ok = lo <= r.ci95[0] and r.ci95[1] <= up
    assert criterion(f"C4 sandwich {code} p={p}", ok,
                     f"low={lo:.4e} <= CI [{r.ci95[0]:.4e}, {r.ci95[1]:.4e}] <= up={up:.4e}, "
                     f"{r.frames} frames")


def test_c5_truncation_convergence(criterion):
    _, _, sp40 = bounds_for("(13,17)", 40)
    _, _, sp20 = bounds_for("(13,17)", 20)
    a, b = ber_up(0.01, sp40), ber_up(0.01, sp20)
    relchg = abs(a - b) / a
    assert criterion("C5 ber_up J_max 20 vs 40 at p=0.01", relchg < 0.05,
                     f"{b:.6e} vs {a:.6e}, rel change {relchg:.2e} (tol 5e-2)")


@pytest.mark.slow
def test_c6_memory_six(criterion):
    spec = GeneratorSpec.parse("(117,155)")
    t = build_trellis(spec)
    t0 = time.perf_counter()
    w0 = min(active_distances(t, 40).values())
    sp = compute_spectrum(t, 40, w0 + 8)
    elapsed = time.perf_counter() - t0
    bc = curve(spec, sp, [0.005, 0.01, 0.02, 0.03, 0.05])
    lo, up = bc.ber_low[3], bc.ber_up[3]
    r = run_campaign(spec, ChannelConfig(0.03, seed=20240), M6_FRAMES, 1000, trellis=t)
    ok = spec.m == 6 and elapsed < 60 and (bc.ber_low <= bc.ber_up).all() \
        and lo <= r.ci95[0] and r.ci95[1] <= up
    assert criterion("C6 (117,155) spectrum + sandwich p=0.03", ok,
                     f"spectrum {elapsed:.2f}s (w_min={w0}, W_max={w0 + 8}); "
                     f"low={lo:.4e} <= CI [{r.ci95[0]:.4e}, {r.ci95[1]:.4e}] <= up={up:.4e}")


@pytest.mark.parametrize("code", M3_CODES + ["(117,155)"])
def test_c7_zero_crossover(code, criterion):
    spec, t, sp = bounds_for(code)
    lo, up = ber_low(0.0, summarize(sp), spec.m), ber_up(0.0, sp)
    r = run_campaign(spec, ChannelConfig(0.0, 1), 50, 1000, trellis=t)
    ok = lo == 0.0 and up == 0.0 and r.ber == 0.0 and r.bit_errors == 0
    assert criterion(f"C7 p=0 gives zeros {code}", ok, f"low={lo} up={up} sim={r.ber}")


def test_c8_determinism_across_workers(tmp_path, criterion):
    outs = []
    for workers in (1, 4):
        out = tmp_path / f"sim_w{workers}.csv"
        rc = main(["simulate", "--code", "(13,17)", "--pgrid", "0.03,0.05", "--frames", "3000",
                   "--seed", "77", "--workers", str(workers), "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert criterion("C8 simulate bit-identical for 1 vs 4 workers", outs[0] == outs[1],
                     f"{len(outs[0])} bytes")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
