import numpy as np
import pytest

from mmbackhaul import ArrivalModel, DemandProfile
from mmbackhaul.traffic import Segment, arrivals_for, bits_per_subframe, tracking_profile


def test_fractional_rate_alternates():
    model = ArrivalModel(packet_bits=100)
    assert [model.draw(1, "D", 250) for _ in range(6)] == [2, 3, 2, 3, 2, 3]


def test_zero_rate_generates_nothing():
    model = ArrivalModel(packet_bits=100)
    assert sum(model.draw(1, "U", 0) for _ in range(50)) == 0


@pytest.mark.parametrize("rate", [1, 67000, 33000, 55417, 123457])
def test_long_run_count_matches_integral(rate):
    model = ArrivalModel(packet_bits=55417)
    n = 997
    count = sum(model.draw(2, "D", rate) for _ in range(n))
    assert abs(count - rate * n / 55417) < 1


def test_poisson_is_seeded():
    a = [ArrivalModel(100, "poisson", 4).draw(1, "D", 250) for _ in range(1)]
    b = [ArrivalModel(100, "poisson", 4).draw(1, "D", 250) for _ in range(1)]
    assert a == b
    model = ArrivalModel(100, "poisson", 9)
    assert abs(np.mean([model.draw(1, "D", 250) for _ in range(4000)]) - 2.5) < 0.1


def test_unknown_arrival_kind():
    with pytest.raises(ValueError):
        ArrivalModel(100, "bursty")


def test_step_applies_at_configured_subframe():
    profile = DemandProfile.uniform([1, 2], 10, 5).with_steps(1, [(30, 20, None)])
    assert profile.rates(1, 29) == (10, 5)
    assert profile.rates(1, 30) == (20, 5)
    assert profile.rates(2, 30) == (10, 5)
    model = ArrivalModel(packet_bits=10)
    assert arrivals_for(profile, 1, 29, model) == (1, 0)
    assert arrivals_for(profile, 1, 30, model) == (2, 1)


def test_profile_rejects_bad_segments():
    with pytest.raises(ValueError):
        DemandProfile({1: [Segment(5, 1, 1), Segment(5, 2, 2)]})
    with pytest.raises(ValueError):
        DemandProfile({1: [Segment(1, -1, 0)]})


def test_profile_dict_round_trip():
    profile = DemandProfile.uniform([1, 2], 10, 5).with_steps(2, [(7, None, 9)])
    assert DemandProfile.from_dict(profile.to_dict()) == profile


def test_tracking_profile_steps():
    profile = tracking_profile([1, 2, 3], target=2)
    assert bits_per_subframe(0.67e9, 1e-4) == 67000
    expected = {249: (67000, 33000), 250: (134000, 33000), 400: (134000, 66000),
                600: (67000, 66000), 750: (67000, 33000)}
    for t, rates in expected.items():
        assert profile.rates(2, t) == rates
    assert profile.rates(1, 500) == (67000, 33000)
