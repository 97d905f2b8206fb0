"""Tests for the phantom generator: rendering, subjects, cohorts and the pool."""

from dataclasses import replace

import numpy as np
import pytest

from cinevae.config import CohortSpec
from cinevae.errors import RejectedInputError
from cinevae.models.phantom import LABEL_VALUES, GenerativeFactors, SegSequence, uniform_phases
from cinevae.phantom import (
    contraction_profile,
    generate_cohort,
    generate_pretrain_pool,
    generate_pretrain_subjects,
    generate_subject,
    geometry_from_factors,
    render_frame,
    sample_cohort,
    septal_displacement,
    septal_flash_bump,
)
from cinevae.phantom.cohort import calibrate_response
from cinevae.phantom.geometry import EPI_FOLLOW, MAX_SHRINK
from cinevae.phantom.measure import lv_center_row, septal_boundary_column


class TestProfiles:
    """Contraction and septal-flash time courses."""

    def test_contraction_boundary_values(self):
        assert contraction_profile(0.0) == pytest.approx(0.0)
        assert contraction_profile(0.35) == pytest.approx(1.0)
        assert contraction_profile(0.999) < 1e-3

    def test_septal_flash_supported_on_early_systole(self):
        phases = np.linspace(0.0, 0.99, 100)
        bump = septal_flash_bump(phases)

        assert np.all(bump[phases < 0.02] == 0.0)
        assert np.all(bump[phases > 0.2] == 0.0)
        assert bump.max() == pytest.approx(1.0, abs=1e-3)
        assert np.all(septal_flash_bump(np.array([0.08, 0.1, 0.14])) == 1.0)


class TestRenderFrame:
    """Rasterised geometry of one frame."""

    def test_phase_zero_ignores_septal_flash(self, default_factors):
        """Given two subjects differing only in SF amplitude, ED frames should match."""
        # Given
        with_sf = geometry_from_factors(default_factors)
        without_sf = geometry_from_factors(replace(default_factors, sf_amplitude=0.0))

        # When/Then
        assert np.array_equal(render_frame(with_sf, 0.0), render_frame(without_sf, 0.0))

    def test_end_systole_is_smaller(self, default_factors):
        """Given fixed factors, foreground area at phase 0.35 is below phase 0."""
        geom = geometry_from_factors(default_factors)

        ed = np.count_nonzero(render_frame(geom, 0.0))
        es = np.count_nonzero(render_frame(geom, 0.35))

        assert es < ed

    def test_labels_closed_and_all_classes_present(self, default_factors):
        frame = render_frame(geometry_from_factors(default_factors), 0.0)

        assert frame.shape == (3, 80, 80)
        assert set(np.unique(frame)) == set(LABEL_VALUES)

    def test_out_of_bounds_geometry_rejected(self, default_factors):
        """Given an LV centred at the grid edge, should reject."""
        factors = replace(default_factors, center_x=5.0)

        with pytest.raises(RejectedInputError, match="out of bounds"):
            geometry_from_factors(factors)

    def test_phase_outside_cycle_rejected(self, default_factors):
        with pytest.raises(RejectedInputError):
            render_frame(geometry_from_factors(default_factors), 1.0)


class TestSeptalFlash:
    """The planted concept is measurable from the label maps."""

    def test_sf_subject_shows_early_systolic_displacement(self, default_factors):
        # Given
        subject = generate_subject(default_factors, 25, seed=3)

        # When
        shift = septal_displacement(subject.sequence, 0)

        # Then
        assert shift >= 1.0

    def test_no_sf_subject_keeps_septum_still(self, default_factors):
        subject = generate_subject(replace(default_factors, sf_amplitude=0.0), 25, seed=3)

        assert abs(septal_displacement(subject.sequence, 0)) < 0.5

    @pytest.mark.parametrize("radius", [8.0, 10.0, 12.0])
    def test_smallest_planted_amplitude_clears_one_pixel(self, default_factors, radius):
        """Given sf_amplitude = 2 px at any cohort radius, the mean early-systolic shift is >= 1 px."""
        # Given
        factors = replace(default_factors, sf_amplitude=2.0, base_radius=radius)

        # When
        with_sf = generate_subject(factors, 25, seed=0).sequence
        without_sf = generate_subject(replace(factors, sf_amplitude=0.0), 25, seed=0).sequence

        # Then
        assert septal_displacement(with_sf, 0) >= 1.0
        assert abs(septal_displacement(without_sf, 0)) < 0.5

    def test_frame_zero_counts_towards_the_mean(self):
        """Given a 2-column shift at phase 0.1 only, the mean over phases < 0.2 is 1."""
        # Given
        labels = np.zeros((2, 1, 10, 10), dtype=np.uint8)
        labels[0, 0, 2:8, 3:7] = 2
        labels[1, 0, 2:8, 5:7] = 2
        seq = SegSequence(labels, np.array([0.0, 0.1]))

        # When/Then
        assert septal_displacement(seq, 0) == pytest.approx(1.0)


def symmetric_septal_column(geom, phase: float, center_row: int, half_band: int = 3) -> float:
    """Leftmost column of the contracting epicardial disk of slice 0, ignoring septal flash."""
    s = geom.slices[0]
    stroke = MAX_SHRINK * geom.contraction_amplitude * s.endo_radius
    epi = s.epi_radius - EPI_FOLLOW * stroke * float(contraction_profile(phase))
    cols = np.arange(geom.width, dtype=np.float64)
    found = []
    for row in range(center_row - half_band, center_row + half_band + 1):
        inside = np.hypot(cols - s.center_x, float(row) - s.center_y) < epi
        if inside.any():
            found.append(int(np.argmax(inside)))
    return float(np.mean(found))


class TestSymmetricContraction:
    """Septal boundary against an independent disk rasteriser."""

    @pytest.mark.parametrize("phase", [0.05, 0.95])
    def test_no_sf_matches_symmetric_prediction(self, default_factors, phase):
        # Given
        geom = geometry_from_factors(replace(default_factors, sf_amplitude=0.0))
        row = lv_center_row(render_frame(geom, 0.0)[0])

        # When
        rendered = septal_boundary_column(render_frame(geom, phase)[0], row)

        # Then
        assert rendered == symmetric_septal_column(geom, phase, row)

    def test_sf_departs_from_prediction_only_in_early_systole(self, default_factors):
        """Given sf > 0, phase 0.05 leaves the symmetric prediction and phase 0.95 follows it."""
        # Given
        geom = geometry_from_factors(default_factors)
        row = lv_center_row(render_frame(geom, 0.0)[0])

        # When
        early = septal_boundary_column(render_frame(geom, 0.05)[0], row)
        late = septal_boundary_column(render_frame(geom, 0.95)[0], row)

        # Then
        assert early > symmetric_septal_column(geom, 0.05, row)
        assert late == symmetric_septal_column(geom, 0.95, row)

    def test_static_ventricle_frames_match_without_sf(self, default_factors):
        """Given no contraction, phases 0.05 and 0.95 render identically unless SF is planted."""
        still = replace(default_factors, contraction_amplitude=0.0)
        no_sf = geometry_from_factors(replace(still, sf_amplitude=0.0))
        sf = geometry_from_factors(still)

        assert np.array_equal(render_frame(no_sf, 0.05), render_frame(no_sf, 0.95))
        assert not np.array_equal(render_frame(sf, 0.05), render_frame(sf, 0.95))


class TestGenerateSubject:
    """Deterministic labeled subjects."""

    def test_deterministic(self, default_factors):
        """Given identical inputs twice, should return identical subjects."""
        first = generate_subject(default_factors, 5, seed=11)
        second = generate_subject(default_factors, 5, seed=11)

        assert first == second

    def test_sf_label_follows_amplitude(self, default_factors):
        assert generate_subject(default_factors, 3, seed=1).y_k == [1]
        assert generate_subject(replace(default_factors, sf_amplitude=0.0), 3, seed=1).y_k == [0]

    def test_too_few_frames_rejected(self, default_factors):
        with pytest.raises(RejectedInputError, match="T must be >= 2"):
            generate_subject(default_factors, 1, seed=0)

    def test_phases_are_uniform(self, default_factors):
        subject = generate_subject(default_factors, 4, seed=0)

        assert np.array_equal(subject.sequence.frame_phase, uniform_phases(4))


class TestGenerateCohort:
    """Cohorts with a calibrated class mixture."""

    def test_count_and_regeneration(self):
        """Given n=73, every subject regenerates from its stored factors and seed."""
        # Given
        spec = CohortSpec(n_subjects=73)
        response = calibrate_response(spec)

        # When
        cohort = generate_cohort(spec, 3, seed=0)

        # Then
        assert len(cohort) == 73
        for subject in cohort[:5]:
            again = generate_subject(subject.factors, 3, subject.seed, response)
            assert again == subject

    def test_same_seed_same_labels(self):
        spec = CohortSpec(n_subjects=200)

        first = [(d.y, d.y_sf) for d in sample_cohort(spec, 7)]
        second = [(d.y, d.y_sf) for d in sample_cohort(spec, 7)]

        assert first == second

    def test_both_primary_classes_present(self):
        cohort = generate_cohort(CohortSpec(n_subjects=4), 2, seed=5)

        assert {s.y for s in cohort} == {0, 1}

    def test_responder_fraction_matches_spec(self):
        """Given n=2000, the responder fraction is within 0.03 of 47/73."""
        draws = sample_cohort(CohortSpec(n_subjects=2000), 0)

        fraction = np.mean([d.y for d in draws])

        assert abs(fraction - 47 / 73) <= 0.03

    def test_sf_conditionals_match_mixture(self):
        """Given n=10000, P(SF | responder) and P(SF | non-responder) are within 0.03 of 27/47 and 10/26."""
        # Given
        draws = sample_cohort(CohortSpec(n_subjects=10000), 0)

        # When
        y = np.array([d.y for d in draws])
        sf = np.array([d.y_sf for d in draws])

        # Then
        assert abs(sf[y == 1].mean() - 27 / 47) <= 0.03
        assert abs(sf[y == 0].mean() - 10 / 26) <= 0.03

    def test_invalid_spec_rejected(self):
        with pytest.raises(RejectedInputError):
            generate_cohort({"n_subjects": 1}, 3, seed=0)

    def test_smaller_grid_scales_geometry(self):
        cohort = generate_cohort(CohortSpec(n_subjects=4), 2, seed=0, height=40, width=40)

        assert cohort[0].sequence.shape == (2, 3, 40, 40)


class TestPretrainPool:
    """Unlabeled pool with broader geometry."""

    def test_single_sequence(self):
        pool = generate_pretrain_pool(1, 4, seed=0)

        assert len(pool) == 1
        assert len(pool[0]) == 4

    def test_pool_subjects_are_unlabeled_and_deterministic(self):
        first = generate_pretrain_subjects(3, 2, seed=9)
        second = generate_pretrain_subjects(3, 2, seed=9)

        assert first == second
        assert all(s.y is None and s.y_k == [] for s in first)

    def test_radius_spread_exceeds_cohort(self):
        """Given 500 draws from each generator, the pool's radius std is larger."""
        pool = generate_pretrain_subjects(500, 2, seed=0)
        cohort = sample_cohort(CohortSpec(n_subjects=500), 0)

        pool_std = np.std([s.factors.base_radius for s in pool])
        cohort_std = np.std([d.factors.base_radius for d in cohort])

        assert pool_std > cohort_std

    def test_empty_pool_rejected(self):
        with pytest.raises(RejectedInputError):
            generate_pretrain_subjects(0, 3, seed=0)


def test_factor_validation(default_factors):
    with pytest.raises(RejectedInputError, match="contraction_amplitude"):
        geometry_from_factors(replace(default_factors, contraction_amplitude=1.5))
    with pytest.raises(RejectedInputError, match="sf_amplitude"):
        geometry_from_factors(GenerativeFactors(0.5, -1.0, 0.5, 10.0, 40.0, 40.0))
