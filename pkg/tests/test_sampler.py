from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levytv.errors import CapabilityError, DomainError
from levytv.levy_model import AtomMeasure, Band, DensityMeasure, LevyTriplet, StableMeasure
from levytv.sampler import (
    IncrementBatch,
    make_rng,
    sample_big_jump_increments,
    sample_process_increments,
    sample_replicates,
    sample_small_jump_increments,
)

N = 10**6


def _within(sample, target, k=4.0):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - target) <= k * se


class TestSmallJumps:
    def test_atom_lattice_and_mean(self):
        b = sample_small_jump_increments(AtomMeasure((0.1,), (2.0,)), 0.0, 0.5, 1.0, N, seed=11)
        k = (b.values + 0.2) / 0.1
        assert np.allclose(k, np.round(k), atol=1e-9)
        assert k.min() >= -1e-9
        assert _within(b.values, 0.0)

    def test_symmetric_skewness(self, sym_half):
        v = sample_small_jump_increments(sym_half, 0.01, 0.1, 1.0, N, seed=12).values
        assert _within(v**3, 0.0)

    def test_fourth_moment(self, sym_half):
        v = sample_small_jump_increments(sym_half, 0.01, 0.1, 1.0, N, seed=13).values
        s2 = sym_half.moment(2, 0.01, 0.1)
        m4 = sym_half.moment(4, 0.01, 0.1)
        assert _within(v**4, m4 + 3 * s2**2)

    def test_density_measure_tabulated(self, sym_half):
        dm = DensityMeasure(sym_half.density, Band(0.01, 0.1), symmetric=True)
        v = sample_small_jump_increments(dm, 0.01, 0.1, 1.0, 400_000, seed=14).values
        s2 = sym_half.moment(2, 0.01, 0.1)
        assert _within(v**2, s2)

    def test_infinite_activity_needs_eta(self, sym_half):
        with pytest.raises(CapabilityError, match="eta"):
            sample_small_jump_increments(sym_half, 0.0, 0.1, 1.0, 10, seed=1)

    def test_refinement_restores_variance(self, sym_half):
        b = sample_small_jump_increments(sym_half, 0.02, 0.1, 1.0, 400_000, seed=15,
                                         gaussian_refinement=True)
        assert b.neglected_variance == 0.0
        assert _within(b.values**2, sym_half.moment(2, 0.0, 0.1))

    def test_neglected_variance_reported(self, sym_half):
        b = sample_small_jump_increments(sym_half, 0.02, 0.1, 1.0, 10, seed=15)
        assert b.neglected_variance == pytest.approx(sym_half.moment(2, 0.0, 0.02))


class TestBigJumps:
    def test_zero_intensity(self):
        b = sample_big_jump_increments(StableMeasure(1.0, band=Band(0.0, 0.3)), 0.5, 1.0, 1000, seed=2)
        assert np.all(b.values == 0)

    def test_void_probability(self):
        m = StableMeasure(1.0, band=Band(0.0, 1.0))
        v = sample_big_jump_increments(m, 0.5, 1.0, N, seed=3).values
        assert m.mass(0.5, math.inf) == pytest.approx(2.0)
        assert _within((v == 0).astype(float), math.exp(-2.0))

    def test_poisson_atoms(self):
        v = sample_big_jump_increments(AtomMeasure((0.8,), (1.0,)), 0.5, 0.3, N, seed=4).values
        k = v / 0.8
        assert np.allclose(k, np.round(k))
        assert _within(v, 0.24)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    def test_infinite(self):
        # heavy tail with infinite mass above eps, passed as a bare measure
        dens = DensityMeasure(lambda x: np.abs(x) ** -0.5)
        with pytest.raises(CapabilityError):
            sample_big_jump_increments(dens, 1.0, 1.0, 10, 1)


class TestProcess:
    def test_gauss_only(self):
        tr = LevyTriplet(0.0, 2.0, StableMeasure(1.0))
        v = sample_process_increments(tr, 0.5, 0.1, 0.5, N, seed=5, mask={"gauss"}).values
        assert _within(v**2, 1.0)
        assert _within(v**4, 3.0)
        assert _within(v, 0.0)

    def test_gauss_plus_small(self, sym_half):
        tr = LevyTriplet(0.0, 0.5, sym_half)
        v = sample_process_increments(tr, 0.1, 0.01, 1.0, N, seed=6, mask={"gauss", "small_jumps"}).values
        assert _within(v**2, 0.5 + sym_half.moment(2, 0.01, 0.1))

    def test_full_mask_atoms_mean_zero(self):
        tr = LevyTriplet(0.0, 0.3, AtomMeasure((0.05, -0.02), (3.0, 1.0)))
        v = sample_process_increments(tr, 0.5, 0.0, 1.0, N, seed=7).values
        assert _within(v, 0.0)

    def test_drift(self):
        tr = LevyTriplet(1.5, 0.0, AtomMeasure.zero())
        v = sample_process_increments(tr, 1.0, 0.0, 2.0, 5, seed=8).values
        assert np.allclose(v, 3.0)

    def test_bad_mask(self):
        with pytest.raises(DomainError):
            sample_process_increments(LevyTriplet(0.0, 1.0), 1.0, 0.0, 1.0, 5, 1, mask={"gamma"})

    @pytest.mark.parametrize("workers", [1, 2, 4])
    def test_deterministic_across_workers(self, workers):
        tr = LevyTriplet(0.2, 1.0, StableMeasure(1.4, 1.0, 0.5))
        ref = sample_process_increments(tr, 0.5, 0.05, 1.0, 2000, seed=9)
        got = sample_process_increments(tr, 0.5, 0.05, 1.0, 2000, seed=9, workers=workers)
        assert np.array_equal(ref.values, got.values)

    def test_replicates_are_schedule_free(self):
        tr = LevyTriplet(0.0, 1.0, StableMeasure(1.4))
        a = sample_replicates(tr, 0.5, 0.1, 1.0, 50, seed=3, reps=6)
        b = sample_replicates(tr, 0.5, 0.1, 1.0, 50, seed=3, reps=6, workers=3)
        assert np.array_equal(a, b)
        assert not np.array_equal(a[0], a[1])

    def test_substreams_differ(self):
        x = make_rng(1, "gauss").random(4)
        y = make_rng(1, "small_jumps").random(4)
        z = make_rng(1, "gauss", replicate=1).random(4)
        assert not np.array_equal(x, y) and not np.array_equal(x, z)


@settings(max_examples=20)
@given(beta=st.floats(0.2, 1.9), cp=st.floats(0.0, 2.0), cm=st.floats(0.1, 2.0),
       eps=st.floats(0.05, 1.0), seed=st.integers(0, 2**32))
def test_jump_sizes_in_band(beta, cp, cm, eps, seed):
    m = StableMeasure(beta, cp, cm)
    eta = eps / 3
    b = sample_small_jump_increments(m, eta, eps, 1.0, 200, seed)
    assert b.values.size == 200 and np.all(np.isfinite(b.values))


class TestExport:
    def test_csv_and_binary_roundtrip(self, tmp_path):
        tr = LevyTriplet(0.0, 1.0, StableMeasure(1.2))
        b = sample_process_increments(tr, 0.5, 0.05, 1.0, 100, seed=10)
        b.to_csv(tmp_path / "x.csv")
        b.to_binary(tmp_path / "x.bin")
        assert (tmp_path / "x.csv").read_text().startswith("value\n")
        assert np.array_equal(IncrementBatch.read_csv(tmp_path / "x.csv"), b.values)
        assert np.array_equal(IncrementBatch.read_binary(tmp_path / "x.bin"), b.values)
        assert (tmp_path / "x.bin").stat().st_size == 800
