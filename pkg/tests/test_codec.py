import json
import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from llmtime_bench import codec
from llmtime_bench.codec import ScalingConfig, ScalingState, decode, encode, fit_scaling
from llmtime_bench.errors import DecodeFailure, InvalidArgument, TuningFailure

VALUE_RE = r"(- )?\d( \d)*"
GRAMMAR = re.compile(rf"^{VALUE_RE}( , {VALUE_RE})*$")
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def naive_quantile(values, q):
    """Linear interpolation between order statistics, written out by hand."""
    xs = sorted(values)
    pos = q * (len(xs) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])


# --- scaling ------------------------------------------------------------------

def test_fit_scaling_min_max():
    st_ = fit_scaling([1, 2, 3, 4, 5], ScalingConfig(alpha=1.0, beta=0.0))
    assert (st_.offset, st_.scale) == (1.0, 4.0)
    assert st_.transform([1, 2, 3, 4, 5]).tolist() == [0, 0.25, 0.5, 0.75, 1]


def test_fit_scaling_constant_fallback():
    st_ = fit_scaling([7, 7, 7], ScalingConfig(alpha=0.5, beta=0.2))
    assert (st_.offset, st_.scale) == (7.0, 1.0)
    assert st_.transform([7, 7, 7]).tolist() == [0, 0, 0]


def test_fit_scaling_interpolated_quantiles():
    values = list(range(101))
    expected_offset = naive_quantile(values, 0.1)
    expected_scale = naive_quantile([v - expected_offset for v in values], 0.9)
    assert (expected_offset, expected_scale) == pytest.approx((10.0, 80.0))
    st_ = fit_scaling(values, ScalingConfig(alpha=0.9, beta=0.1))
    assert st_.offset == pytest.approx(expected_offset, abs=1e-12)
    assert st_.scale == pytest.approx(expected_scale, abs=1e-12)


def test_fit_scaling_empty():
    with pytest.raises(InvalidArgument):
        fit_scaling([], ScalingConfig())


@pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"alpha": 1.5}, {"beta": 1.0}, {"precision": -1}])
def test_scaling_config_validation(kw):
    with pytest.raises(InvalidArgument):
        ScalingConfig(**kw)


@given(st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=80).filter(lambda v: max(v) - min(v) > 1e-3),
       st.sampled_from([0.5, 0.7, 0.9, 0.99, 1.0]), st.sampled_from([0.0, 0.15, 0.3]))
def test_alpha_quantile_maps_to_one(values, alpha, beta):
    state = fit_scaling(values, ScalingConfig(alpha=alpha, beta=beta))
    scaled = state.transform(values)
    if naive_quantile([v - state.offset for v in values], alpha) > codec.MIN_SCALE:
        assert naive_quantile(list(scaled), alpha) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(state.inverse(scaled), values, rtol=1e-9, atol=1e-9)


# --- encoding -----------------------------------------------------------------

def test_encode_golden():
    enc = encode([0.789, 7.89, 78.9, 789.0], ScalingState.identity(2))
    assert enc.text == "7 8 , 7 8 9 , 7 8 9 0 , 7 8 9 0 0"
    assert enc.count == 4


def test_encode_zero_and_negative():
    assert encode([0.0], ScalingState.identity(3)).text == "0"
    assert encode([-2.5, 1.0], ScalingState.identity(1)).text == "- 2 5 , 1 0"


def test_encode_truncates_not_rounds():
    assert encode([0.799], ScalingState.identity(2)).text == "7 9"
    assert encode([-0.789], ScalingState.identity(2)).text == "- 7 8"


def test_truncation_snaps_binary_roundoff():
    # 0.29 * 100 is 28.999999999999996 in binary floating point
    assert codec.truncated_digits(0.29, 2) == 29
    assert codec.truncated_digits(0.299999, 2) == 29


def test_encode_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        encode([1.0, math.inf], ScalingState.identity())


@given(st.lists(finite, min_size=1, max_size=30), st.integers(0, 4))
def test_encode_matches_grammar(values, precision):
    state = fit_scaling(values, ScalingConfig(precision=precision))
    text = encode(values, state).text
    assert GRAMMAR.match(text)
    assert text.count(",") + 1 == len(values)


@given(st.lists(finite, min_size=1, max_size=20), st.integers(0, 3))
def test_encode_length_nondecreasing_in_precision(values, precision):
    state = fit_scaling(values, ScalingConfig(precision=precision))
    longer = ScalingState(state.offset, state.scale, ScalingConfig(precision=precision + 1))
    assert len(encode(values, longer).text) >= len(encode(values, state).text)


# --- decoding -----------------------------------------------------------------

def test_decode_golden():
    out = decode("7 8 , 7 8 9 , 7 8 9 0 , 7 8 9 0 0", ScalingState.identity(2))
    assert out.tolist() == [0.78, 7.89, 78.90, 789.00]


def test_decode_stops_at_garbage():
    assert decode("1 0 , garbage , 2 0", ScalingState.identity(1)).tolist() == [1.0]


def test_decode_failure():
    with pytest.raises(DecodeFailure):
        decode("x y z", ScalingState.identity())


def test_decode_max_values_and_negative():
    st_ = ScalingState.identity(1)
    assert decode("- 1 5 , 2 0 , 3 0", st_, max_values=2).tolist() == [-1.5, 2.0]


def test_decode_drops_interrupted_value():
    assert decode("1 0 , 2 0 , 3 x", ScalingState.identity(1)).tolist() == [1.0, 2.0]


def test_decode_trailing_separator():
    assert decode(" 1 , 2 , 3 ,", ScalingState.identity(0)).tolist() == [1.0, 2.0, 3.0]


def test_decode_unscales():
    st_ = ScalingState(10.0, 4.0, ScalingConfig(precision=2))
    assert decode("2 5", st_).tolist() == [11.0]


@given(finite, st.integers(0, 4), st.floats(-100, 100), st.floats(0.01, 1000))
def test_round_trip_equals_truncation_grain(v, precision, offset, scale):
    state = ScalingState(offset, scale, ScalingConfig(precision=precision))
    got = decode(encode([v], state).text, state)
    expected = codec.truncate(float(state.transform([v])[0]), precision) * scale + offset
    assert got.tolist() == [expected]


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 10**6)), min_size=1, max_size=15),
       st.integers(0, 4))
def test_decode_encode_decode_idempotent(items, precision):
    text = " , ".join(("- " if neg and n else "") + " ".join(str(n)) for neg, n in items)
    state = ScalingState.identity(precision)
    first = decode(text, state)
    again = decode(encode(first, state).text, state)
    assert again.tolist() == first.tolist()


# --- tuning -------------------------------------------------------------------

def test_tune_singleton():
    cfg = ScalingConfig(alpha=0.7)
    assert codec.tune_scaling([1, 2], [3], [cfg], lambda *a: 0.0) is cfg


def test_tune_argmax():
    a, b = ScalingConfig(alpha=0.5), ScalingConfig(alpha=0.9)
    scores = {a: 1.0, b: 2.0}
    assert codec.tune_scaling([1, 2], [3], [a, b], lambda tr, va, c: scores[c]) is b


def test_tune_skips_failures_and_raises_when_all_fail():
    a, b = ScalingConfig(alpha=0.5), ScalingConfig(alpha=0.9)

    def scorer(tr, va, c):
        if c is a:
            raise RuntimeError("boom")
        return -1.0

    assert codec.tune_scaling([1], [2], [a, b], scorer) is b
    with pytest.raises(TuningFailure):
        codec.tune_scaling([1], [2], [a], scorer)
    with pytest.raises(InvalidArgument):
        codec.tune_scaling([1], [2], [], scorer)


def test_default_grid():
    assert len(codec.DEFAULT_GRID) == 12
    assert ScalingConfig() == ScalingConfig(alpha=0.99, beta=0.3)


def test_tune_replays_recorded_fixture(fixtures_dir):
    from llmtime_bench import forecaster, llm
    from make_tuning_fixture import fixture_series

    expected = json.loads((fixtures_dir / "tuning_expected.json").read_text())
    train, validation = fixture_series(expected["series"])
    grid = [ScalingConfig(**g) for g in expected["grid"]]
    replay = llm.CachingProvider(None, fixtures_dir / "tuning_cache")
    scorer = forecaster.mae_scorer(replay, forecaster.LlmtimeConfig(num_samples=expected["num_samples"]))
    best = codec.tune_scaling(train, validation, grid, scorer)
    assert best == ScalingConfig(**expected["argmax"])
    assert replay.misses == 0
