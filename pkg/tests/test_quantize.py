import numpy as np
import pytest

from sdcs.quantize import (DEFAULT_FILTERS, ONE_BIT, MidriseAlphabet, QuantizerSpec, Rule,
                           calibrate_gamma, design_filter, filter_moments_ok, msq,
                           noise_shaped_state, recursion_residual, scalar_quantize, sigma_delta,
                           stability_report)


def test_scalar_quantizer_examples():
    a = MidriseAlphabet(2, 0.5)
    assert np.allclose(a.elements, [-0.75, -0.25, 0.25, 0.75])
    assert scalar_quantize(a, 0.3) == 0.25
    assert scalar_quantize(ONE_BIT, -0.4) == -1.0
    assert scalar_quantize(a, 10.0) == 0.75


def test_msq_examples():
    a = MidriseAlphabet(2, 0.5)
    assert np.allclose(msq(a, [0.3, -0.6]).q, [0.25, -0.75])
    # ties go to the larger element
    assert np.allclose(msq(a, np.zeros(3)).q, 0.25)


def test_msq_cell_bound():
    a = MidriseAlphabet(5, 0.1)
    y = np.linspace(-a.L * a.delta, a.L * a.delta, 2001)
    assert np.max(np.abs(y - msq(a, y).q)) <= a.delta / 2 + 1e-15


def test_first_order_one_bit_by_hand():
    spec = QuantizerSpec(ONE_BIT, r=1, rule="greedy", gamma=1.0, check=False)
    s = sigma_delta(spec, [0.3] * 4)
    assert np.array_equal(s.q, [1, -1, 1, 1])
    assert np.allclose(s.u, [-0.7, 0.6, -0.1, -0.8], atol=1e-15)
    rep = stability_report(s, spec)
    assert rep.u_max == pytest.approx(0.8) and rep.stable


def test_stability_boundary():
    spec = QuantizerSpec(ONE_BIT, r=1, rule="greedy", gamma=0.8, check=False)
    s = sigma_delta(spec, [0.3] * 4)
    s.u_max = 0.8
    assert stability_report(s, spec).stable
    s.u_max = 0.8 + 1e-15
    assert not stability_report(s, spec).stable


def test_first_order_matches_direct_recursion():
    y = np.random.default_rng(0).uniform(-1, 1, 500)
    spec = QuantizerSpec.greedy(1, 0.1, 1.0)
    s = sigma_delta(spec, y)
    a = spec.alphabet
    u, q = 0.0, np.empty_like(y)
    for i, yi in enumerate(y):
        q[i] = a.quantize(u + yi)
        u = u + yi - q[i]
    assert np.array_equal(s.q, q)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_greedy_stability(r):
    delta, mu = 0.1, 1.0
    spec = QuantizerSpec.greedy(r, delta, mu)
    assert spec.alphabet.L == 2 * int(np.ceil(mu / delta)) + 2 ** r + 1
    rng = np.random.default_rng(r)
    worst = 0.0
    for _ in range(10_000):
        y = rng.uniform(-mu, mu, 50)
        worst = max(worst, sigma_delta(spec, y).u_max)
    assert worst <= delta / 2


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("rule", ["greedy", "filtered"])
def test_recursion_identity(r, rule):
    rng = np.random.default_rng(r)
    if rule == "filtered":
        if r not in DEFAULT_FILTERS:
            pytest.skip("no default filter")
        spec = QuantizerSpec.filtered(r, 0.5, gamma=np.inf)
        y = rng.uniform(-0.5, 0.5, 300)
    else:
        spec = QuantizerSpec.greedy(r, 0.05, 1.0)
        y = rng.uniform(-1, 1, 300)
    s = sigma_delta(spec, y)
    assert recursion_residual(y, s, r) <= 1e-10
    assert np.allclose(noise_shaped_state(y, s.q, r), s.u, atol=1e-9)
    assert all(qi in spec.alphabet for qi in s.q)


def test_default_filters_are_valid():
    for r, h in DEFAULT_FILTERS.items():
        assert filter_moments_ok(h, r)
        assert np.abs(h).sum() <= 2 * ONE_BIT.L - 2 * 0.6 / ONE_BIT.delta + 1e-12


def test_filter_search_result_is_valid():
    h = design_filter(2, 1.4)
    assert filter_moments_ok(h, 2)
    assert np.abs(h).sum() <= 1.4 + 1e-9


def test_filter_norm_condition_enforced():
    with pytest.raises(ValueError, match=r"\|\|h\|\|_1"):
        QuantizerSpec.filtered(2, 0.9, gamma=1.0)


def test_filter_must_factor():
    with pytest.raises(ValueError, match="does not factor"):
        QuantizerSpec(ONE_BIT, r=2, rule="filtered", mu=0.1, h=(1.0,), gamma=1.0)


def test_greedy_levels_enforced():
    with pytest.raises(ValueError, match="needs L"):
        QuantizerSpec(MidriseAlphabet(3, 0.1), r=1, rule="greedy", mu=1.0)


def test_greedy_gamma_default():
    assert QuantizerSpec.greedy(2, 0.02, 1.0).gamma == 0.01


def test_calibrated_gamma_is_deterministic_and_covers_runs():
    spec = QuantizerSpec.filtered(2, 0.6)
    assert spec.gamma == calibrate_gamma(spec.with_gamma(np.inf))
    y = np.random.default_rng(3).uniform(-0.6, 0.6, 3000)
    assert sigma_delta(spec, y).stable


def test_rule_parsing():
    assert Rule.parse("Filtered") is Rule.FILTERED
    with pytest.raises(ValueError):
        Rule.parse("beta")
