import math

import numpy as np
import pytest
from scipy.integrate import quad

from bklab.distributions import (
    CounterexampleDist,
    Gaussian,
    TriangularSymmetric,
    TwoSidedPareto,
    UniformSymmetric,
    abs_mean,
    bernoulli,
    counterexample_dist,
    law_rows,
    median,
    moment_xg,
    normalize_counterexample,
    parse_dist_spec,
    rademacher,
    sample,
    symmetrization_check,
    symmetrize,
    tail,
    truncation_threshold,
)
from bklab.errors import DomainError, PrecisionError, UnsupportedOperationError
from bklab.functions import doubling_witness_exp, exponential, power

ALL_KINDS = [
    rademacher(),
    UniformSymmetric(1.0),
    TwoSidedPareto(3.0),
    Gaussian(1.0),
    bernoulli(0.9),
    symmetrize(TwoSidedPareto(3.0)),
    symmetrize(UniformSymmetric(1.0)),
]


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.spec_string())
def test_sampling_deterministic_and_prefix_stable(dist):
    a = sample(dist, 99, 50)
    b = sample(dist, 99, 50)
    c = sample(dist, 99, 2000)
    assert np.array_equal(a, b)
    assert np.array_equal(a, c[:50])
    assert not np.array_equal(a, sample(dist, 100, 50))


def test_sample_sanity_bands():
    x = sample(rademacher(), 1, 1_000_000)
    assert abs(x.mean()) <= 4.0 / math.sqrt(1_000_000)
    u = sample(UniformSymmetric(1.0), 2, 1_000_000)
    assert abs(np.abs(u).mean() - 0.5) <= 0.005


def test_counterexample_samples_in_support():
    d = counterexample_dist(exponential(1.0), 1000)
    xs = sample(d, 3, 5000)
    support = set(np.round(np.concatenate([-d.law.ts, d.law.ts]), 12))
    assert set(np.round(xs, 12)) <= support


def test_moment_xg_discrete_exact():
    est = moment_xg(rademacher(), power(2))
    assert est.value == 4.0 and est.verdict == "finite" and est.se == 0.0


def test_moment_xg_pareto_abs_mean():
    est = moment_xg(TwoSidedPareto(3.0), power(0))
    assert est.verdict == "finite"
    assert math.isclose(est.value, 1.5, rel_tol=1e-6)


def test_moment_xg_gaussian_power1():
    est = moment_xg(Gaussian(1.0), power(1))
    expected = math.sqrt(2.0 / math.pi) + 1.0  # E|X| + E X^2
    assert math.isclose(est.value, expected, rel_tol=1e-6)


def test_moment_xg_divergence_detection():
    est = moment_xg(TwoSidedPareto(1.5), power(1))
    assert est.verdict == "divergence-evidence"


def test_moment_xg_unsupported_pairs():
    with pytest.raises(UnsupportedOperationError):
        moment_xg(Gaussian(1.0), power(1), mode="analytic")
    with pytest.raises(UnsupportedOperationError):
        moment_xg(rademacher(), power(1), mode="partial_sum")


def test_tail_values():
    assert tail(rademacher(), 0.5).value == 1.0
    assert tail(rademacher(), 1.5).value == 0.0
    est = tail(TwoSidedPareto(3.0), 2.0)
    assert est.exact and est.value == 0.125
    # numeric integral cross-check of the pareto survival function
    num, _ = quad(lambda x: 3.0 * x**-4.0, 2.0, np.inf)
    assert math.isclose(est.value, num, rel_tol=1e-9)
    w = UniformSymmetric(1.0)
    assert tail(w, 0.25).value == 0.75
    g = Gaussian(2.0)
    assert math.isclose(tail(g, 1.0).value, math.erfc(1.0 / (2.0 * math.sqrt(2))), rel_tol=1e-12)


def test_tail_monotone_nonincreasing():
    d = TwoSidedPareto(2.5)
    ts = np.linspace(0.0, 10.0, 50)
    vals = [tail(d, float(t)).value for t in ts]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_tail_mc_for_symmetrized_pareto():
    d = symmetrize(TwoSidedPareto(3.0))
    est = tail(d, 1.0, reps=50_000)
    assert not est.exact and est.se > 0
    assert 0.0 < est.value < 1.0


def test_median_conventions():
    assert median(UniformSymmetric(1.0)) == 0.0
    assert median(rademacher()) == 0.0
    assert median(bernoulli(0.9)) == 1.0
    # empirical fall-back stays near 0 for a symmetric-but-unreduced law
    d = symmetrize(TwoSidedPareto(3.0))
    assert median(d) == 0.0  # symmetric kind, analytic convention


def test_truncation_threshold_examples():
    t = truncation_threshold(rademacher(), 0.5)
    assert 1.0 < t <= 1.01  # smallest grid point above the atom
    assert truncation_threshold(UniformSymmetric(1.0), 0.5) == 0.0
    # closed-form oracle: E[|X| ; |X| >= t] = (3/2) t^-2 for beta=3, scale=1,
    # so the 1 - alpha = 0.75 threshold is sqrt(2).
    t = truncation_threshold(TwoSidedPareto(3.0), 0.25)
    assert math.isclose(t, math.sqrt(2.0), rel_tol=2e-3)
    d = TwoSidedPareto(3.0)
    m = d.abs_trunc_moment_exact(np.asarray([t]))[0]
    assert m <= 0.75
    num, _ = quad(lambda x: x * 3.0 * x**-4.0, t, np.inf)
    assert math.isclose(m, num, rel_tol=1e-9)


def test_truncation_threshold_validation():
    with pytest.raises(DomainError):
        truncation_threshold(rademacher(), 1.5)
    with pytest.raises(UnsupportedOperationError):
        truncation_threshold(symmetrize(TwoSidedPareto(3.0)), 0.5)


def test_normalize_counterexample_mass_accounting():
    g = exponential(1.0)
    ts = doubling_witness_exp(1.0, 100_000)
    law = normalize_counterexample(g, ts, 100_000)
    assert 1.0 - 1e-5 <= law.stored_mass <= 1.0
    assert law.stored_mass + law.tail_mass_bound >= 1.0 - 1e-12
    assert np.all(law.weights > 0)
    with pytest.raises(PrecisionError):
        normalize_counterexample(g, ts, 1)


def test_counterexample_moment_dichotomy():
    d = counterexample_dist(exponential(1.0), 50_000)
    own = moment_xg(d, exponential(1.0))
    assert own.verdict == "finite"
    assert own.halfwidth <= 1e-9 * own.value
    assert math.isclose(own.value, 2.0 * d.law.c * math.pi**2 / 6.0, rel_tol=1e-8)
    doubled = moment_xg(d, exponential(1.0), arg_scale=2.0)
    assert doubled.verdict == "divergence-evidence"
    harmonic = float(np.sum(1.0 / np.arange(1, 50_001)))
    assert doubled.value >= 2.0 * d.law.c * harmonic


def test_counterexample_tail_and_trunc_moment():
    d = counterexample_dist(exponential(1.0), 5000)
    # below the first atom everything stored is in the tail event
    assert tail(d, 0.0).value == pytest.approx(d.law.stored_mass)
    t2 = float(d.law.ts[1])
    expected = d.law.stored_mass - 2.0 * float(d.law.weights[0])
    assert tail(d, t2).value == pytest.approx(expected)
    m = d.abs_trunc_moment_exact(np.asarray([0.0]))[0]
    assert m == pytest.approx(2.0 * float(np.sum(d.law.weights * d.law.ts)))


def test_law_rows_symmetry():
    d = counterexample_dist(exponential(1.0), 1000)
    rows = law_rows(d.law)
    assert len(rows) == 2000
    masses = {}
    for atom, m in rows:
        masses[atom] = m
    for t, w in zip(d.law.ts, d.law.weights):
        assert masses[float(t)] == masses[-float(t)] == float(w)


def test_symmetrize_closed_forms():
    s = symmetrize(rademacher())
    assert s.values == (-2.0, 0.0, 2.0)
    assert s.probs == (0.25, 0.5, 0.25)
    g = symmetrize(Gaussian(1.0))
    assert isinstance(g, Gaussian) and math.isclose(g.sigma, math.sqrt(2.0))
    t = symmetrize(UniformSymmetric(1.0))
    assert isinstance(t, TriangularSymmetric) and t.half_width == 2.0
    assert math.isclose(abs_mean(t).value, 2.0 / 3.0)


def test_symmetrized_law_is_symmetric_empirically():
    d = symmetrize(TwoSidedPareto(3.0))
    xs = sample(d, 17, 200_000)
    for t in (0.5, 1.0, 2.0):
        p_hi = np.mean(xs >= t)
        p_lo = np.mean(xs <= -t)
        se = math.sqrt(max(p_hi, 1e-12) / len(xs))
        assert abs(p_hi - p_lo) <= 4.0 * se + 4.0 / len(xs)


def test_symmetrization_inequality_exact_and_mc():
    rows = symmetrization_check(rademacher())
    assert rows and all(r["exact"] and r["ok"] for r in rows)
    rows = symmetrization_check(UniformSymmetric(1.0), reps=50_000)
    assert rows and all(r["ok"] for r in rows)


def test_parse_dist_spec_round_trip():
    for spec in ["rademacher", "uniform:w=2", "pareto2:beta=3,scale=1", "gaussian:sigma=0.5"]:
        d = parse_dist_spec(spec)
        assert parse_dist_spec(d.spec_string()).spec_string() == d.spec_string()
    d = parse_dist_spec("sym:uniform:w=1")
    assert isinstance(d, TriangularSymmetric)
    d = parse_dist_spec("counterexample:G=exp,prefix=1000")
    assert isinstance(d, CounterexampleDist) and d.law.ts.size == 1000
    with pytest.raises(DomainError):
        parse_dist_spec("cauchy:gamma=1")


def test_atom_mass_validation():
    with pytest.raises(DomainError):
        bernoulli(1.5)
    with pytest.raises(DomainError):
        TwoSidedPareto(-1.0)
