import csv
import io
import json
import math

import numpy as np
import pytest

from spiked_limits.prior import make_discrete_prior, rademacher, sparse_rademacher, standardize
from spiked_limits.rs_threshold import (
    SolverError,
    golden_section_max,
    maximize_rs,
    reconstruction_threshold,
    rs_potential,
    rs_report,
    spectral_threshold,
)

# Rademacher fixed point q = E tanh(lam q + sqrt(lam q) z) by brentq on
# quad integrals; phi = E log cosh(.) - lam q / 2 - lam q^2 / 4.
RADEMACHER_ORACLE = [
    (1.5, 0.394186133771826, 0.0073865102553360845),
    (2.5, 0.7495587868447409, 0.10089659102927284),
    (4.0, 0.9165110110378024, 0.3729642770809586),
]
# brentq on lambda of max_{q>0} F with quad-based psi and bounded scalar search
LAMBDA_C_SPARSE_005 = 0.7473092878554031


class TestGoldenSection:
    def test_quadratic(self):
        x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2 + 2.0, 0.0, 1.0)
        assert x == pytest.approx(0.3, abs=1e-7)
        assert fx == pytest.approx(2.0, abs=1e-12)

    def test_boundary_maximum(self):
        x, _ = golden_section_max(lambda t: t, 0.0, 1.0)
        assert x == pytest.approx(1.0, abs=1e-7)


class TestMaximizeRS:
    @pytest.mark.parametrize("lam, q_ref, phi_ref", RADEMACHER_ORACLE)
    def test_rademacher_oracle(self, lam, q_ref, phi_ref):
        q, phi = maximize_rs(rademacher(), lam)
        assert q == pytest.approx(q_ref, abs=1e-7)
        assert phi == pytest.approx(phi_ref, abs=1e-10)

    @pytest.mark.parametrize("lam", [0.0, 0.3, 0.9])
    def test_uninformative_below_threshold(self, lam):
        assert maximize_rs(rademacher(), lam) == (0.0, 0.0)

    def test_high_snr_limits(self):
        q, phi = maximize_rs(rademacher(), 50.0)
        assert q == pytest.approx(1.0, abs=1e-6)
        # phi -> lam/4 - H(X)
        assert phi == pytest.approx(50 / 4 - math.log(2), abs=1e-6)

    def test_potential_at_zero(self):
        assert rs_potential(sparse_rademacher(0.1), 2.0, 0.0) == 0.0
        with pytest.raises(ValueError):
            rs_potential(rademacher(), 1.0, -0.5)

    def test_phi_nondecreasing(self):
        p = sparse_rademacher(0.05)
        vals = [maximize_rs(p, lam)[1] for lam in np.linspace(0.5, 1.2, 8)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_first_order_jump_for_sparse_prior(self):
        # discontinuous q* at the threshold when rho is small
        p = sparse_rademacher(0.05)
        assert maximize_rs(p, LAMBDA_C_SPARSE_005 - 2e-3)[0] == 0.0
        assert maximize_rs(p, LAMBDA_C_SPARSE_005 + 2e-3)[0] > 0.3


class TestThresholds:
    def test_rademacher(self):
        assert reconstruction_threshold(rademacher()) == pytest.approx(1.0, abs=1e-4)

    def test_sparse_oracle(self):
        p = sparse_rademacher(0.05)
        lam_c = reconstruction_threshold(p)
        assert lam_c == pytest.approx(LAMBDA_C_SPARSE_005, abs=1e-4)
        assert lam_c < spectral_threshold(p)

    def test_spectral_threshold(self):
        p = make_discrete_prior([-2.0, 2.0], [1.0, 1.0])
        assert spectral_threshold(p) == pytest.approx(1 / 16)
        assert reconstruction_threshold(p) == pytest.approx(1 / 16, abs=1e-4)
        with pytest.raises(ValueError):
            spectral_threshold(make_discrete_prior([0.0], [1.0]))

    def test_non_centered_warns(self):
        with pytest.warns(UserWarning):
            assert reconstruction_threshold(make_discrete_prior([0.0, 1.0], [0.5, 0.5])) == 0.0

    def test_solver_error_when_bracket_fails(self, monkeypatch):
        import spiked_limits.rs_threshold as rs

        rs._bisect_threshold.cache_clear()
        monkeypatch.setattr(rs, "maximize_rs", lambda prior, lam: (0.0, 0.0))
        with pytest.raises(SolverError):
            rs.reconstruction_threshold(rademacher())
        rs._bisect_threshold.cache_clear()

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_spectral_bound_random(self, seed):
        rng = np.random.default_rng(seed)
        p = standardize(make_discrete_prior(rng.uniform(-2, 2, 4), rng.uniform(0.1, 1, 4)))
        assert reconstruction_threshold(p) <= spectral_threshold(p) * (1 + 1e-4)


class TestReport:
    def test_csv_and_json(self):
        report = rs_report(rademacher(), [0.5, 2.5])
        rows = list(csv.reader(io.StringIO(report.to_csv())))
        assert rows[0] == ["lambda", "q_star", "phi_rs"]
        assert float(rows[2][1]) == pytest.approx(RADEMACHER_ORACLE[1][1], abs=1e-7)
        data = json.loads(report.to_json())
        assert data["centered"] is True
        assert data["spectral_threshold"] == 1.0


@pytest.mark.parametrize("scale", [0.07, 3.0])
def test_threshold_scale_invariance(scale):
    # lambda_c(c X) = lambda_c(X) / c^4
    base = make_discrete_prior([-1.0, 0.5], [1.0, 2.0])
    scaled = make_discrete_prior(base.atoms * scale, base.weights)
    assert reconstruction_threshold(scaled) * scale**4 == pytest.approx(reconstruction_threshold(base), rel=2e-5)
