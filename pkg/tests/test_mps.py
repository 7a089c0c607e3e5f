import numpy as np
import pytest

from mblvqe.hamiltonians import (
    AA_PHASES,
    LongRangeParams,
    alternating_fields,
    aubry_andre,
    exact_ground,
    long_range_xxz,
)
from mblvqe.mps import mps_chi_curve, mps_variational_ground, random_product_mps
from mblvqe.state import CompiledObservable, ResourceLimitError


class TestMPSBasics:
    def test_product_state_contraction(self):
        rng = np.random.default_rng(0)
        mps = random_product_mps(3, rng)
        psi = mps.state()
        assert np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-12)
        # product of the site vectors, little-endian
        want = np.kron(mps.tensors[2][0, :, 0],
                       np.kron(mps.tensors[1][0, :, 0], mps.tensors[0][0, :, 0]))
        assert np.allclose(psi, want)


class TestVariationalGround:
    def test_full_rank_matches_exact(self):
        n = 6
        ham = aubry_andre(n, AA_PHASES["ergodic"])
        e0, _ = exact_ground(ham, n)
        energy, mps = mps_variational_ground(ham, n, 2 ** (n // 2),
                                             rng=np.random.default_rng(1))
        assert energy == pytest.approx(e0, abs=1e-6)
        psi = mps.state()
        assert CompiledObservable(ham).expectation(psi / np.linalg.norm(psi)) == pytest.approx(
            energy, abs=1e-9
        )

    def test_variational_bound(self):
        n = 6
        ham = long_range_xxz(n, LongRangeParams(fields=alternating_fields(n)))
        e0, _ = exact_ground(ham, n)
        for chi in (1, 2, 4):
            energy, _ = mps_variational_ground(ham, n, chi, rng=np.random.default_rng(2))
            assert energy >= e0 - 1e-9

    def test_bond_dimension_respected(self):
        n = 8
        ham = aubry_andre(n, AA_PHASES["critical"])
        _, mps = mps_variational_ground(ham, n, 3, rng=np.random.default_rng(3))
        assert max(mps.bond_dims()) <= 3

    def test_chi_curve_monotone(self):
        n = 8
        ham = long_range_xxz(n, LongRangeParams(alpha_decay=1.1,
                                                fields=alternating_fields(n)))
        e0, _ = exact_ground(ham, n)
        curve = mps_chi_curve(ham, n, [1, 2, 4, 8, 16], e0,
                              rng=np.random.default_rng(4))
        errs = [err for _, err in curve]
        assert all(errs[i + 1] <= errs[i] + 1e-9 for i in range(len(errs) - 1))
        assert errs[-1] < 1e-6  # chi = 2^(n/2): no truncation possible

    def test_cap_enforced(self):
        ham = aubry_andre(4, AA_PHASES["critical"])
        with pytest.raises(ResourceLimitError):
            mps_variational_ground(ham, 4, 2, cap=3)

    def test_invalid_chi(self):
        ham = aubry_andre(4, AA_PHASES["critical"])
        with pytest.raises(ValueError):
            mps_variational_ground(ham, 4, 0)
