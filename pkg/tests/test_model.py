import math

import numpy as np
import pytest

from stmoe.dist import SkewTParams, skew_t_pdf
from stmoe.model import (
    Constraints,
    Dataset,
    ExpertParams,
    GatingParams,
    ModelParams,
    gating_probs,
    log_likelihood,
    mixture_logpdf,
)
from stmoe.simulate import SimConfig, benchmark_truth, generate


def two_component_stmoe(alpha=None):
    gp = GatingParams(np.asarray(alpha if alpha is not None else [[0.3, -1.2]]))
    return ModelParams(
        family="stmoe",
        gating=gp,
        experts=(
            ExpertParams(beta=np.array([0.5, 2.0]), sigma2=0.8, skew=1.5, dof=4.0),
            ExpertParams(beta=np.array([-1.0, 0.3]), sigma2=1.6, skew=-2.0, dof=9.0),
        ),
    )


class TestDataset:
    def test_row_mismatch(self):
        with pytest.raises(ValueError, match="row mismatch"):
            Dataset(y=np.zeros(3), X=np.zeros((4, 2)), R=np.zeros((3, 2)))

    def test_rejects_nan(self):
        y = np.array([0.0, np.nan])
        with pytest.raises(ValueError, match="NaN"):
            Dataset(y=y, X=np.zeros((2, 1)), R=np.zeros((2, 1)))

    def test_shapes(self):
        d = Dataset(y=np.zeros(5), X=np.ones((5, 2)), R=np.ones((5, 3)))
        assert (d.n, d.p, d.q) == (5, 2, 3)


class TestGatingProbs:
    def test_zero_alpha_uniform(self):
        for K in (1, 2, 5):
            gp = GatingParams.null(K, 3)
            pi = gating_probs(np.array([1.0, -2.0, 0.7]), gp)
            np.testing.assert_allclose(pi, np.full(K, 1.0 / K), rtol=1e-14)

    def test_benchmark_gate_at_zero(self):
        gp = GatingParams(np.array([[0.0, 10.0]]))
        pi = gating_probs(np.array([1.0, 0.0]), gp)
        np.testing.assert_allclose(pi, [0.5, 0.5], rtol=1e-14)

    def test_logistic_value(self):
        gp = GatingParams(np.array([[0.0, 10.0]]))
        pi = gating_probs(np.array([1.0, 0.5]), gp)
        sig5 = 1.0 / (1.0 + math.exp(-5.0))
        assert pi[0] == pytest.approx(sig5, rel=1e-12)
        assert pi[1] == pytest.approx(1.0 - sig5, rel=1e-12)

    def test_simplex(self):
        # logit spread kept below ~30 so the open-interval property is
        # representable in floats
        rng = np.random.default_rng(0)
        for _ in range(25):
            K, q = rng.integers(2, 6), rng.integers(1, 4)
            gp = GatingParams(rng.normal(0, 3, size=(K - 1, q)))
            pi = gating_probs(rng.normal(0, 2, size=q), gp)
            assert abs(pi.sum() - 1.0) <= 1e-14
            assert np.all(pi > 0.0) and np.all(pi < 1.0)

    def test_covariate_rescaling_invariance(self):
        # scaling a covariate and dividing its coefficient column cancels
        rng = np.random.default_rng(3)
        alpha = rng.normal(size=(2, 2))
        r = np.array([1.0, 0.8])
        scale = 7.0
        alpha_scaled = alpha.copy()
        alpha_scaled[:, 1] /= scale
        r_scaled = np.array([1.0, 0.8 * scale])
        np.testing.assert_allclose(
            gating_probs(r, GatingParams(alpha)),
            gating_probs(r_scaled, GatingParams(alpha_scaled)),
            rtol=1e-12,
        )

    def test_dimension_mismatch(self):
        gp = GatingParams(np.zeros((1, 2)))
        with pytest.raises(ValueError):
            gating_probs(np.zeros(3), gp)


class TestMixtureLogpdf:
    def test_single_normal_component(self):
        psi = ModelParams(
            family="nmoe",
            gating=GatingParams.null(1, 2),
            experts=(ExpertParams(beta=np.array([1.0, -0.5]), sigma2=2.0),),
        )
        x = np.array([1.0, 0.4])
        y = 0.3
        mean = 1.0 - 0.5 * 0.4
        expected = -0.5 * math.log(2 * math.pi * 2.0) - (y - mean) ** 2 / (2 * 2.0)
        assert mixture_logpdf(y, x, x, psi) == pytest.approx(expected, rel=1e-14)

    def test_normal_limit_of_skew_t(self):
        alpha = np.array([[0.4, -0.9]])
        experts_n = (
            ExpertParams(beta=np.array([0.5, 2.0]), sigma2=0.8),
            ExpertParams(beta=np.array([-1.0, 0.3]), sigma2=1.6),
        )
        experts_st = tuple(
            ExpertParams(beta=e.beta, sigma2=e.sigma2, skew=0.0, dof=1e8) for e in experts_n
        )
        nmoe = ModelParams(family="nmoe", gating=GatingParams(alpha), experts=experts_n)
        stmoe = ModelParams(family="stmoe", gating=GatingParams(alpha), experts=experts_st)
        for y in (-2.0, 0.1, 3.7):
            x = np.array([1.0, y / 2])
            assert mixture_logpdf(y, x, x, stmoe) == pytest.approx(
                mixture_logpdf(y, x, x, nmoe), abs=1e-4
            )

    def test_naive_arithmetic_oracle(self):
        psi = two_component_stmoe()
        rng = np.random.default_rng(7)
        for _ in range(20):
            y = rng.normal(0, 3)
            x = np.array([1.0, rng.normal()])
            r = np.array([1.0, rng.normal()])
            # direct non-log evaluation
            logits = np.array([psi.gating.alpha[0] @ r, 0.0])
            gates = np.exp(logits) / np.exp(logits).sum()
            dens = [
                skew_t_pdf(y, SkewTParams(mu=e.beta @ x, sigma2=e.sigma2, skew=e.skew, dof=e.dof))
                for e in psi.experts
            ]
            naive = math.log(gates @ np.array(dens))
            assert mixture_logpdf(y, x, r, psi) == pytest.approx(naive, rel=1e-12)

    def test_component_duplication(self):
        # splitting a component in two identical halves with halved gate mass
        psi = two_component_stmoe(alpha=[[0.3, -1.2]])
        e1, e2 = psi.experts
        split = ModelParams(
            family="stmoe",
            gating=GatingParams(
                np.vstack([psi.gating.alpha[0] - [math.log(2.0), 0.0],
                           psi.gating.alpha[0] - [math.log(2.0), 0.0]])
            ),
            experts=(e1, e1, e2),
        )
        for y in (-1.0, 0.5, 2.0):
            x = np.array([1.0, 0.7])
            r = np.array([1.0, -0.2])
            assert mixture_logpdf(y, x, r, split) == pytest.approx(
                mixture_logpdf(y, x, r, psi), abs=1e-12
            )


class TestLogLikelihood:
    def test_single_row(self):
        psi = two_component_stmoe()
        data = Dataset(y=np.array([0.4]), X=np.array([[1.0, 0.2]]), R=np.array([[1.0, -1.0]]))
        assert log_likelihood(data, psi) == pytest.approx(
            mixture_logpdf(0.4, data.X[0], data.R[0], psi), rel=1e-14
        )

    def test_additivity(self):
        psi = two_component_stmoe()
        rng = np.random.default_rng(11)
        def make(n, seed):
            r = np.random.default_rng(seed)
            return Dataset(
                y=r.normal(size=n),
                X=np.column_stack([np.ones(n), r.normal(size=n)]),
                R=np.column_stack([np.ones(n), r.normal(size=n)]),
            )
        a, b = make(13, 1), make(7, 2)
        combined = Dataset(
            y=np.concatenate([a.y, b.y]),
            X=np.vstack([a.X, b.X]),
            R=np.vstack([a.R, b.R]),
        )
        assert log_likelihood(combined, psi) == pytest.approx(
            log_likelihood(a, psi) + log_likelihood(b, psi), rel=1e-14
        )
        del rng

    def test_benchmark_truth_baseline(self):
        # regression baseline recorded from the first correct run
        truth = benchmark_truth("stmoe")
        data, _ = generate(SimConfig(truth=truth, n=500, seed=7))
        ll = log_likelihood(data, truth)
        assert math.isfinite(ll)
        assert ll == pytest.approx(553.3817542289032, rel=1e-12)


class TestModelParams:
    def test_family_validation(self):
        with pytest.raises(ValueError, match="family"):
            ModelParams(family="gmm", gating=GatingParams.null(1, 2),
                        experts=(ExpertParams(beta=np.zeros(2), sigma2=1.0),))

    def test_component_count_consistency(self):
        with pytest.raises(ValueError, match="experts"):
            ModelParams(
                family="nmoe",
                gating=GatingParams.null(3, 2),
                experts=(ExpertParams(beta=np.zeros(2), sigma2=1.0),),
            )

    def test_stmoe_requires_shape_params(self):
        with pytest.raises(ValueError, match="skew and dof"):
            ModelParams(
                family="stmoe",
                gating=GatingParams.null(1, 2),
                experts=(ExpertParams(beta=np.zeros(2), sigma2=1.0),),
            )

    def test_constraints_default(self):
        psi = two_component_stmoe()
        assert psi.constraints == Constraints()
