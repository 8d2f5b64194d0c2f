import numpy as np
import pytest

from sdcs.decode import (ConstraintNorm, DecodeContext, DecodeProblem, NotConverged, SolverConfig,
                         constraint_residuals, decode_bpdn, decode_onestage, decode_twostage,
                         project_l2_ball, project_linf_box, sobolev_dual)
from sdcs.measure import gen_matrix, gen_noise, gen_sparse
from sdcs.quantize import MidriseAlphabet, QuantizerSpec, msq, sigma_delta
from sdcs.reference import reference_bpdn, reference_onestage
from sdcs.verify import tiny_instances


def _instance(m, N, k, r, delta=0.01, eps=0.0, seed=0, norm="l2"):
    phi = gen_matrix("gaussian", m, N, seed).matrix
    x = gen_sparse(N, k, 1.0, seed).vector
    eta = gen_noise(m, eps, seed).vector
    y = phi @ x + eta
    spec = QuantizerSpec.greedy(r, delta, float(np.max(np.abs(y))) + delta)
    q = sigma_delta(spec, y).q
    return DecodeProblem(phi, q, r, spec.gamma, eps, norm), x, eta


def test_zero_codeword_decodes_to_zero():
    phi = gen_matrix("gaussian", 20, 30, 1).matrix
    res = decode_onestage(DecodeProblem(phi, np.zeros(20), 2, 1.0))
    assert res.converged
    assert np.max(np.abs(res.x_hat)) < 1e-7 and res.objective < 1e-7


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("norm", ["l2", "linf"])
def test_objective_bounded_by_truth(r, norm):
    p, x, _ = _instance(120, 80, 4, r, norm=norm, seed=r)
    res = decode_onestage(p)
    assert res.converged
    assert res.objective <= np.abs(x).sum() + 1e-6 * max(1.0, np.abs(x).sum())


def test_tiny_instance_against_reference():
    p, x, _ = _instance(6, 8, 1, 1, seed=3)
    res = decode_onestage(p, SolverConfig(tol_gap=1e-9))
    xr, objr = reference_onestage(p.phi, p.q, p.r, p.gamma)
    assert np.linalg.norm(res.x_hat - xr) <= 1e-5
    assert abs(res.objective - objr) <= 1e-6


def test_noise_variable_against_reference():
    p, x, eta = _instance(10, 12, 2, 2, eps=0.01, seed=5)
    res = decode_onestage(p, SolverConfig(tol_gap=1e-9))
    xr, objr = reference_onestage(p.phi, p.q, p.r, p.gamma, p.eps)
    assert np.linalg.norm(res.x_hat - xr) <= 1e-5
    assert abs(res.objective - objr) <= 1e-6
    assert res.feas_nu <= 1e-9


def test_truth_is_feasible():
    p, x, eta = _instance(200, 100, 5, 2, eps=2e-3, seed=7)
    assert constraint_residuals(p, x, eta) == (0.0, 0.0)


def test_linf_solutions_are_l2_feasible():
    for p, _ in tiny_instances(20, seed=2):
        if p.constraint_norm is not ConstraintNorm.LINFBOX:
            continue
        res = decode_onestage(p)
        l2 = DecodeProblem(p.phi, p.q, p.r, p.gamma, p.eps, "l2")
        nu = res.nu_hat if p.eps > 0 else None
        fq, fn = constraint_residuals(l2, res.x_hat, nu)
        assert fq <= 1e-6 and fn <= 1e-6


def test_gap_at_convergence():
    p, _, _ = _instance(150, 100, 5, 1, seed=9)
    cfg = SolverConfig()
    res = decode_onestage(p, cfg)
    assert res.converged and res.gap <= cfg.tol_gap * max(1.0, res.objective)


@pytest.mark.parametrize("strategy", ["dual", "primal"])
def test_strategies_agree(strategy):
    p, _, _ = _instance(300, 100, 5, 2, seed=11)
    base = decode_onestage(p)
    res = decode_onestage(p, SolverConfig(strategy=strategy))
    assert res.converged
    assert np.linalg.norm(res.x_hat - base.x_hat) <= 1e-5


def test_context_reuse_gives_identical_result():
    p, _, _ = _instance(200, 64, 3, 2, seed=4)
    ctx = DecodeContext(p.phi, p.r)
    a = decode_onestage(p, context=ctx)
    b = decode_onestage(p)
    assert np.array_equal(a.x_hat, b.x_hat)


def test_strict_mode_raises():
    p, _, _ = _instance(100, 64, 3, 2, seed=1)
    with pytest.raises(NotConverged) as info:
        decode_onestage(p, SolverConfig(max_iters=2, strict=True))
    assert info.value.result is not None and not info.value.result.converged


def test_non_converged_is_flagged():
    p, _, _ = _instance(100, 64, 3, 2, seed=1)
    res = decode_onestage(p, SolverConfig(max_iters=2))
    assert not res.converged


def test_record_keys():
    p, x, _ = _instance(60, 40, 2, 1, seed=2)
    rec = decode_onestage(p).record(x, k=2, rule="greedy", delta=0.01)
    assert list(rec) == ["m", "N", "k", "r", "rule", "delta", "eps", "objective", "feas_q",
                         "feas_nu", "iters", "converged", "err_l2"]


def test_problem_validation():
    phi = np.ones((3, 2))
    with pytest.raises(ValueError):
        DecodeProblem(phi, np.ones(4), 1, 1.0)
    with pytest.raises(ValueError):
        DecodeProblem(phi, np.ones(3), 1, 0.0)
    with pytest.raises(ValueError):
        DecodeProblem(phi, np.ones(3), 1, 1.0, eps=-1)
    with pytest.raises(ValueError):
        DecodeProblem(phi, np.ones(3), 1, 1.0, constraint_norm="l3")


# baselines ----------------------------------------------------------------

def test_bpdn_zero_when_radius_covers_y():
    phi = gen_matrix("gaussian", 10, 20, 0).matrix
    y = phi @ gen_sparse(20, 2, 1.0, 0).vector
    assert np.array_equal(decode_bpdn(phi, y, np.linalg.norm(y)), np.zeros(20))


def test_bpdn_exact_recovery():
    N, k = 40, 1
    phi = gen_matrix("gaussian", 20, N, 2).matrix
    x = gen_sparse(N, k, 1.0, 2).vector
    xh = decode_bpdn(phi, phi @ x, 0.0)
    assert np.linalg.norm(xh - x) <= 1e-5
    xr, _ = reference_bpdn(phi, phi @ x, 0.0)
    assert np.linalg.norm(xh - xr) <= 1e-5


def test_bpdn_matches_reference_with_radius():
    phi = gen_matrix("gaussian", 15, 30, 3).matrix
    y = phi @ gen_sparse(30, 3, 1.0, 3).vector + 0.01
    xh = decode_bpdn(phi, y, 0.05, SolverConfig(tol_gap=1e-9))
    xr, _ = reference_bpdn(phi, y, 0.05)
    assert np.linalg.norm(xh - xr) <= 1e-5


def test_msq_bpdn_error_does_not_decay():
    delta, N, k = 0.1, 128, 3
    errs = []
    for m in (100, 200, 400):
        phi = gen_matrix("gaussian", m, N, 1).matrix
        worst = 0.0
        for t in range(5):
            x = gen_sparse(N, k, 1.0, 1, key=(t,)).vector
            q = msq(MidriseAlphabet(60, delta), phi @ x).q
            worst = max(worst, np.linalg.norm(decode_bpdn(phi, q, np.sqrt(m) * delta / 2) - x))
        errs.append(worst)
    # no m**(-1/2)-type decay: quadrupling m leaves the error well above half
    assert errs[-1] > 0.5 * errs[0]


def test_sobolev_dual_square_case():
    E, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 5)))
    assert np.allclose(sobolev_dual(E, 1), np.linalg.inv(E), atol=1e-10)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_sobolev_dual_left_inverse(r):
    E = np.random.default_rng(r).standard_normal((40, 4))
    assert np.allclose(sobolev_dual(E, r) @ E, np.eye(4), atol=1e-8)


def test_sobolev_dual_matches_least_squares():
    rng = np.random.default_rng(8)
    m, k, r = 20, 2, 1
    E = rng.standard_normal((m, k))
    x = rng.standard_normal(k)
    spec = QuantizerSpec.greedy(r, 0.05, float(np.max(np.abs(E @ x))) + 0.05)
    q = sigma_delta(spec, E @ x).q
    Dinv = np.tril(np.ones((m, m)))
    z, *_ = np.linalg.lstsq(Dinv @ E, Dinv @ q, rcond=None)
    F = sobolev_dual(E, r)
    assert np.allclose(F @ q, z, atol=1e-10)
    assert np.linalg.norm(F @ q - x) <= np.linalg.norm(F, 2) * np.linalg.norm(Dinv @ (E @ x - q))


def test_sobolev_dual_rank_check():
    E = np.ones((6, 2))
    with pytest.raises(np.linalg.LinAlgError):
        sobolev_dual(E, 1)


def test_twostage_support_recovery_rate():
    N, k, m, r, delta = 128, 3, 200, 1, 0.01
    phi = gen_matrix("gaussian", m, N, 0).matrix
    hits = 0
    for t in range(100):
        s = gen_sparse(N, k, 1.0, 0, key=(t,))
        x = s.vector.copy()
        x[s.support] = np.sign(x[s.support]) * (0.3 + np.abs(x[s.support]))
        spec = QuantizerSpec.greedy(r, delta, float(np.max(np.abs(phi @ x))) + delta)
        xh = decode_twostage(phi, sigma_delta(spec, phi @ x).q, k, r, gamma=spec.gamma)
        hits += set(np.flatnonzero(xh)) == set(s.support)
    assert hits >= 95


def test_twostage_support_fails_for_tiny_entries():
    N, k, m, r, delta = 64, 3, 100, 1, 0.5
    phi = gen_matrix("gaussian", m, N, 1).matrix
    miss = 0
    for t in range(40):
        s = gen_sparse(N, k, 1.0, 1, key=(t,))
        x = s.vector.copy()
        x[s.support] = 1e-3 * np.sign(x[s.support])
        spec = QuantizerSpec.greedy(r, delta, float(np.max(np.abs(phi @ x))) + delta)
        xh = decode_twostage(phi, sigma_delta(spec, phi @ x).q, k, r, gamma=spec.gamma)
        miss += set(np.flatnonzero(xh)) != set(s.support)
    assert miss >= 20


def test_twostage_full_support_is_frame_reconstruction():
    rng = np.random.default_rng(4)
    phi = rng.standard_normal((30, 3))
    x = rng.standard_normal(3)
    spec = QuantizerSpec.greedy(2, 0.05, float(np.max(np.abs(phi @ x))) + 0.05)
    q = sigma_delta(spec, phi @ x).q
    assert np.allclose(decode_twostage(phi, q, 3, 2, gamma=spec.gamma), sobolev_dual(phi, 2) @ q)


def test_projections():
    assert np.allclose(project_l2_ball([0.1, 0.2], [0, 0], 1.0), [0.1, 0.2])
    assert np.allclose(project_l2_ball([3.0, 4.0], [0, 0], 1.0), [0.6, 0.8])
    assert np.allclose(project_linf_box([2.0, -0.5], [0, 0], 1.0), [1.0, -0.5])
    assert np.allclose(project_l2_ball([4.0, 1.0], [1.0, 1.0], 1.0), [2.0, 1.0])
