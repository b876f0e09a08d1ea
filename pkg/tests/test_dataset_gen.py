import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plcmimic.client import make_client
from plcmimic.config import ProtocolConfig
from plcmimic.dataset import (
    MIN_MEANINGFUL_SIZE,
    SamplePair,
    combs,
    execute_boundaries,
    generate_boundary_dataset,
    iterative_sizing,
    pairs_per_pass,
    triplet,
)
from plcmimic.errors import EmptyRange, TrainerUnavailable
from plcmimic.plant import Plant, PlantServer


@given(st.integers(0, 1000), st.integers(0, 5000), st.integers(1, 4),
       st.integers(0, 2 ** 32 - 1))
def test_triplet_bounds_property(low, span, elem, seed):
    high = low + span
    rng = np.random.default_rng(seed)
    if high - elem <= low + 1:
        with pytest.raises(EmptyRange):
            triplet(low, high, elem, rng)
        return
    t = triplet(low, high, elem, rng)
    assert t[0] == low
    assert t[2] == high - elem
    assert low + 1 <= t[1] <= high - elem - 1
    assert len(t) == 3


def test_triplet_is_rng_driven():
    a = triplet(0, 1000, 2, np.random.default_rng(1))
    b = triplet(0, 1000, 2, np.random.default_rng(1))
    assert a == b


def test_combs_counts_are_powers_of_three():
    rng = np.random.default_rng(0)
    for elem in (1, 2, 3):
        out = combs(0, 9, elem, rng)
        assert len(out) == 3 ** elem
        assert sorted(out) == list(range(3 ** elem))
        assert all(len(v) == elem for v in out.values())


def test_combs_width_offset_widens_tuples():
    rng = np.random.default_rng(0)
    out = combs(0, 9, 1, rng, width_offset=1)
    assert len(out) == 9
    assert all(len(v) == 2 for v in out.values())


def test_combs_rejects_zero_width():
    with pytest.raises(EmptyRange):
        combs(0, 9, 1, np.random.default_rng(0), width_offset=-1)


def test_pairs_per_pass_reference_constant():
    assert pairs_per_pass(ProtocolConfig()) == 144


def test_pairs_per_pass_arithmetic():
    assert pairs_per_pass(ProtocolConfig(m_elem=1)) == 36
    assert pairs_per_pass(ProtocolConfig(m_elem=3)) == 468
    assert pairs_per_pass(ProtocolConfig(combs_width_offset=1)) == 432


def test_one_pass_sample_count_matches_formula(cfg):
    with PlantServer(Plant(cfg)) as server:
        with make_client(server.host, server.port, cfg) as client:
            rng = np.random.default_rng(3)
            for digital in (False, True):
                pairs = execute_boundaries(client, cfg, rng, digital=digital)
                assert len(pairs) == pairs_per_pass(cfg)


def test_generated_dataset_truncates_to_target(cfg):
    with PlantServer(Plant(cfg)) as server:
        with make_client(server.host, server.port, cfg) as client:
            pairs = generate_boundary_dataset(client, cfg, seed=9)
    assert len(pairs) == cfg.dataset_size
    assert all(isinstance(p, SamplePair) and p.source_text and p.target_text
               for p in pairs)


def test_s7_generation_matches_formula(s7_cfg):
    with PlantServer(Plant(s7_cfg)) as server:
        with make_client(server.host, server.port, s7_cfg) as client:
            rng = np.random.default_rng(4)
            pairs = execute_boundaries(client, s7_cfg, rng, digital=False)
    assert len(pairs) == pairs_per_pass(s7_cfg)


class TestIterativeSizing:
    def test_plateau_stops_at_best_size(self):
        scores = {200: 0.5, 400: 0.8, 800: 0.95, 1600: 0.99,
                  3200: 0.99, 6400: 0.99}
        report = iterative_sizing(lambda ds: scores[len(ds)],
                                  lambda n: [SamplePair("q", "r")] * n)
        assert report.best_size == 1600
        assert report.best_score == 0.99
        assert [s for s, _ in report.history] == [200, 400, 800, 1600, 3200, 6400]

    def test_tie_counts_as_non_improving(self):
        report = iterative_sizing(lambda ds: 0.5,
                                  lambda n: [SamplePair("q", "r")] * n)
        assert report.best_size == MIN_MEANINGFUL_SIZE
        assert len(report.history) == 3  # first sets the best, two stale stop it

    def test_monotone_improvement_runs_to_cap(self):
        report = iterative_sizing(lambda ds: float(len(ds)),
                                  lambda n: [SamplePair("q", "r")] * n,
                                  max_size=3200)
        assert report.best_size == 3200

    def test_requires_trainer(self):
        with pytest.raises(TrainerUnavailable):
            iterative_sizing(None, lambda n: [])
