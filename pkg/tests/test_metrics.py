"""MAPE, parameter comparison rows, histogram payloads."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsynth.metrics import (
    ParameterSummary,
    build_report,
    compare_parameters,
    histogram,
    mape,
    report_to_dict,
)
from gridsynth.params import RatioParams
from gridsynth.rng import RngStream
from gridsynth.sampler import generate, sample_phase_ratios

from conftest import (
    chain_topology,
    make_params,
    observed_network,
    random_radial_topology,
    single_load,
    three_load,
)


class TestMape:
    def test_identity_is_zero(self):
        assert mape([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_hand_computed_ten_percent(self):
        assert mape([1.0, 2.0], [1.1, 1.8]) == pytest.approx(10.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            mape([1.0], [1.0, 2.0])

    def test_zero_reference_entry(self):
        with pytest.raises(ValueError, match="zero"):
            mape([1.0, 0.0], [1.0, 1.0])

    def test_empty_input(self):
        with pytest.raises(ValueError, match="at least one"):
            mape([], [])

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(
            st.tuples(
                st.floats(0.1, 100.0, allow_nan=False),
                st.floats(0.0, 100.0, allow_nan=False),
            ),
            min_size=1,
            max_size=20,
        ),
        scale=st.floats(0.01, 1000.0),
    )
    def test_scale_invariance_and_positivity(self, values, scale):
        ref = [a for a, _ in values]
        est = [b for _, b in values]
        base = mape(ref, est)
        assert base >= 0.0
        scaled = mape([scale * a for a in ref], [scale * b for b in est])
        assert scaled == pytest.approx(base, rel=1e-9)


class TestHistogram:
    def test_empty_input_gives_zero_counts(self):
        payload = histogram([], 4, 0.0, 1.0)
        assert [row[2] for row in payload] == [0, 0, 0, 0]

    def test_two_values_two_bins(self):
        payload = histogram([0.1, 0.9], 2, 0.0, 1.0)
        assert [row[2] for row in payload] == [1, 1]
        assert payload[0][:2] == (0.0, 0.5)

    def test_out_of_range_values_clamp_into_end_bins(self):
        payload = histogram([-5.0, 0.5, 99.0], 3, 0.0, 1.0)
        assert [row[2] for row in payload] == [1, 1, 1]

    def test_counts_sum_to_length(self):
        values = np.linspace(-1, 2, 137)
        payload = histogram(values, 10, 0.0, 1.0)
        assert sum(row[2] for row in payload) == 137

    @settings(max_examples=30, deadline=None)
    @given(
        values=st.lists(st.floats(-10, 10, allow_nan=False), max_size=50),
        seed=st.integers(0, 10**6),
    )
    def test_permutation_invariance(self, values, seed):
        shuffled = list(values)
        np.random.default_rng(seed).shuffle(shuffled)
        assert histogram(values, 7, -10.0, 10.0) == histogram(shuffled, 7, -10.0, 10.0)

    def test_ratio_draw_mode_sits_at_one_third(self):
        draws = sample_phase_ratios(
            RatioParams((1 / 3, 1 / 3, 1 / 3), 100.0), RngStream(5), size=100_000
        )
        payload = histogram(draws[:, 0], 30, 0.0, 1.0)
        modal = max(payload, key=lambda row: row[2])
        assert modal[0] <= 1 / 3 <= modal[1]


class TestCompareParameters:
    def test_identical_summaries(self):
        summary = ParameterSummary(
            p3_fraction=0.2, phase_choice=(0.4, 0.3, 0.3), mean_kw=(1.0, 1.0, 1.0)
        )
        rows = compare_parameters(summary, summary)
        assert all(row.real == row.synthetic for row in rows)

    def test_reference_magnitudes_pass_through(self):
        real = ParameterSummary(
            p3_fraction=0.1111, phase_choice=(0.3350, 0.3296, 0.3354), mean_kw=(0.454, 0.434, 0.464)
        )
        synth = ParameterSummary(
            p3_fraction=0.1242, phase_choice=(0.3819, 0.3454, 0.2728), mean_kw=(0.423, 0.455, 0.483)
        )
        rows = {row.name: row for row in compare_parameters(real, synth)}
        assert rows["p_3phase"].real == 0.1111
        assert rows["p_3phase"].synthetic == 0.1242
        assert rows["p_phase_A"].real == 0.3350
        assert rows["p_phase_C"].synthetic == 0.2728

    def test_round_trip_through_generator(self):
        topology = random_radial_topology(seed=30, n_buses=80, n_loads=40)
        params = make_params(p3=0.25, choice=(0.5, 0.3, 0.2))
        samples = generate(topology, params, n_samples=50, seed=8)
        summary = ParameterSummary.from_observed([s.to_observed() for s in samples])
        for got, want in zip(summary.phase_choice, (0.5, 0.3, 0.2)):
            assert abs(got - want) < 0.03


class TestBuildReport:
    def _real(self):
        topology = chain_topology([100.0, 100.0], loads=("n1", "n2"))
        return observed_network(
            topology,
            [
                single_load("n1", "A", 0.454),
                single_load("n1", "B", 0.434),
                single_load("n2", "C", 0.464),
                three_load("n2", 0.2, 0.2, 0.2),
            ],
        )

    def test_report_structure(self):
        real = self._real()
        topology = random_radial_topology(seed=31, n_buses=20, n_loads=8)
        samples = generate(topology, make_params(p3=0.3), n_samples=5, seed=1)
        report = build_report(real, [s.to_observed() for s in samples])
        assert len(report.phase_rows) == 3
        assert report.mape_mode == "mean_pair"
        assert {row.name for row in report.parameter_rows} == {
            "p_3phase", "p_phase_A", "p_phase_B", "p_phase_C",
        }
        assert set(report.histograms) == {
            f"p_kw_{phase}_{kind}" for phase in "ABC" for kind in ("real", "synthetic")
        }
        doc = report_to_dict(report)
        assert doc["phases"][0]["phase"] == "A"
        for row in report.phase_rows:
            assert row.mape_percent >= 0.0

    def test_identical_datasets_have_zero_mape(self):
        real = self._real()
        report = build_report(real, [real])
        assert report.mape_mode == "paired_loads"
        for row in report.phase_rows:
            assert row.mape_percent == 0.0
            assert row.mean_kw_real == row.mean_kw_synth
