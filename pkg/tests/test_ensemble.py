import numpy as np
import pytest
from hypothesis import given, strategies as st

from gausscml.damage import run_damage
from gausscml.ensemble import make_blocks, map_blocks, merge_series, ordered_mean
from gausscml.exceptions import GridMismatch, ValidationError
from gausscml.lyapunov import lyapunov_by_config
from gausscml.observables import observable_counts
from gausscml.series import ObservableSeries

from conftest import small_spec


def partial(values, idx=None, times=(1, 2, 3), label="flip_rate", n=1):
    return ObservableSeries(np.array(times), np.array(values, dtype=float), n, label, config_index=idx)


def test_make_blocks_cover_in_order():
    blocks = make_blocks(10, 10_000)
    assert [list(b) for b in blocks] == [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]
    assert make_blocks(3, 10**7) == [range(0, 1), range(1, 2), range(2, 3)]
    assert make_blocks(5, 10) == [range(0, 5)]


def test_map_blocks_order_and_workers():
    blocks = make_blocks(7, 10_000)
    serial = map_blocks(sum, blocks)
    assert serial == [sum(b) for b in blocks]
    assert map_blocks(sum, blocks, workers=3) == serial
    with pytest.raises(ValidationError):
        map_blocks(sum, blocks, workers=0)


def test_ordered_mean():
    np.testing.assert_array_equal(ordered_mean([[1.0, 2.0], [3.0, 6.0]]), [2.0, 4.0])
    with pytest.raises(ValidationError):
        ordered_mean(np.empty((0, 3)))


def test_merge_examples():
    m = merge_series([partial([0.2, 0.4, 0.6], 0), partial([0.4, 0.2, 0.0], 1)])
    np.testing.assert_allclose(m.values, [0.3, 0.3, 0.3])
    assert m.n_configs == 2 and m.config_index is None


def test_merge_weighted_preaveraged():
    m = merge_series([partial([0.1, 0.1, 0.1], n=3), partial([0.5, 0.5, 0.5], n=1)])
    np.testing.assert_allclose(m.values, 0.2)
    assert m.n_configs == 4


def test_merge_errors():
    with pytest.raises(ValidationError):
        merge_series([])
    with pytest.raises(GridMismatch):
        merge_series([partial([0.1, 0.2, 0.3]), partial([0.1, 0.2, 0.3], times=(1, 2, 4))])
    with pytest.raises(ValidationError):
        merge_series([partial([0.1, 0.2, 0.3]), partial([0.1, 0.2, 0.3], label="persistence")])
    with pytest.raises(ValidationError):
        merge_series([partial([0.1, 0.2, 0.3], 0), partial([0.1, 0.2, 0.3])])


@given(st.permutations(range(6)))
def test_merge_permutation_invariant(order):
    rng = np.random.default_rng(5)
    parts = [partial(rng.uniform(0, 1, 3), i) for i in range(6)]
    ref = merge_series(parts)
    shuffled = merge_series([parts[i] for i in order])
    np.testing.assert_array_equal(shuffled.values, ref.values)


def test_merge_of_partials_equals_ensemble():
    counts = observable_counts(small_spec(n_configs=5, t_max=30))
    merged = merge_series(reversed(counts.partials("flip_rate")))
    assert merged == counts.flip_rate_series()
    assert merge_series(counts.partials("persistence")) == counts.persistence_series()


def test_worker_count_does_not_change_results():
    # 5000 sites gives five configurations per block, so twelve configurations span three blocks
    spec = small_spec(n_sites=5000, n_configs=12, t_max=15)
    assert len(make_blocks(12, 5000)) == 3
    one = observable_counts(spec, workers=1)
    eight = observable_counts(spec, workers=8)
    np.testing.assert_array_equal(one.flips, eight.flips)
    np.testing.assert_array_equal(one.alive, eight.alive)
    assert one.flip_rate_series().values.tobytes() == eight.flip_rate_series().values.tobytes()
    d1 = run_damage(spec, t_max=10, workers=1)
    d8 = run_damage(spec, t_max=10, workers=8)
    assert d1.fine.values.tobytes() == d8.fine.values.tobytes()
    l1 = lyapunov_by_config(spec, transient=5, measure_steps=10, workers=1)
    l8 = lyapunov_by_config(spec, transient=5, measure_steps=10, workers=8)
    assert l1.tobytes() == l8.tobytes()
