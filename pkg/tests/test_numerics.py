"""Tests for the deterministic PRNG and small linear-algebra helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gripforecast.errors import ContractViolation
from gripforecast.numerics import Rng, derive_seed, matmul, require_finite

# Reference splitmix64 outputs for seed 1 (the widely published test vector).
SPLITMIX64_SEED1 = [
    10451216379200822465,
    13757245211066428519,
    17911839290282890590,
]


def test_splitmix64_golden_vector():
    rng = Rng(1)
    assert [rng.next_u64() for _ in range(3)] == SPLITMIX64_SEED1


def test_stream_is_platform_stable_floats():
    # Frozen first uniforms for seed 1: (u64 >> 11) * 2**-53 of the golden
    # vector above, asserted exactly — any drift breaks reproducibility.
    rng = Rng(1)
    expected = [(v >> 11) * 2.0**-53 for v in SPLITMIX64_SEED1]
    assert [rng.uniform() for _ in range(3)] == expected


def test_same_seed_same_stream():
    a = Rng(42)
    b = Rng(42)
    assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]


def test_different_seeds_differ():
    assert Rng(0).next_u64() != Rng(1).next_u64()


def test_derive_seed_depends_on_every_component():
    base = derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 3) != base
    assert derive_seed(7, 2, 2) != base
    assert derive_seed(8, 1, 2) != base


def test_uniform_in_unit_interval():
    rng = Rng(3)
    for _ in range(1000):
        u = rng.uniform()
        assert 0.0 <= u < 1.0


def test_uniform_range_bounds():
    rng = Rng(4)
    values = [rng.uniform_range(-2.0, 5.0) for _ in range(500)]
    assert all(-2.0 <= v < 5.0 for v in values)
    assert min(values) < -1.0 and max(values) > 4.0  # actually spreads out


def test_normals_law_of_large_numbers():
    draws = Rng(2).normals(20000, mean=1.5, std=2.0)
    assert abs(float(draws.mean()) - 1.5) < 0.05 * 2.0
    assert abs(float(draws.std()) - 2.0) < 0.05 * 2.0


def test_normals_zero_std_is_constant():
    draws = Rng(5).normals(7, mean=3.25, std=0.0)
    assert np.all(draws == 3.25)


def test_normals_negative_std_rejected():
    with pytest.raises(ContractViolation):
        Rng(5).normals(3, std=-1.0)


def test_normals_consume_fixed_uniform_budget():
    # Each call consumes 2*ceil(n/2) uniforms, so odd-length calls leave the
    # stream in the same place as the even-length call that covers them.
    a = Rng(9)
    a.normals(3)
    b = Rng(9)
    b.normals(4)
    assert a.next_u64() == b.next_u64()


def test_permutation_is_a_permutation():
    rng = Rng(11)
    perm = rng.permutation(50)
    assert sorted(perm.tolist()) == list(range(50))


def test_permutation_deterministic():
    assert Rng(12).permutation(20).tolist() == Rng(12).permutation(20).tolist()


def test_spawn_decorrelates_streams():
    parent = Rng(13)
    child_a = parent.spawn(0)
    child_b = parent.spawn(1)
    assert child_a.next_u64() != child_b.next_u64()


def test_matmul_against_triple_loop():
    rng = Rng(21)
    a = rng.uniform_matrix(5, 7, -1.0, 1.0)
    b = rng.uniform_matrix(7, 3, -1.0, 1.0)
    got = matmul(a, b)
    want = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(7):
                want[i, j] += a[i, k] * b[k, j]
    assert np.max(np.abs(got - want)) < 1e-12


def test_matmul_identity():
    rng = Rng(22)
    a = rng.uniform_matrix(6, 6, -2.0, 2.0)
    assert np.array_equal(matmul(a, np.eye(6)), a)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 8),
    m=st.integers(2, 8),
    k=st.integers(2, 8),
    p=st.integers(2, 8),
    seed=st.integers(0, 2**32),
)
def test_matmul_associativity(n, m, k, p, seed):
    rng = Rng(seed)
    a = rng.uniform_matrix(n, m, -1.0, 1.0)
    b = rng.uniform_matrix(m, k, -1.0, 1.0)
    c = rng.uniform_matrix(k, p, -1.0, 1.0)
    left = matmul(matmul(a, b), c)
    right = matmul(a, matmul(b, c))
    assert np.max(np.abs(left - right)) < 1e-9


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ContractViolation) as err:
        matmul(np.zeros((2, 3)), np.zeros((4, 5)))
    message = str(err.value)
    assert "2x3" in message and "4x5" in message


def test_require_finite_rejects_nan_and_inf():
    require_finite("ok", np.array([1.0, 2.0]))
    with pytest.raises(ContractViolation, match="bad"):
        require_finite("bad", np.array([1.0, math.nan]))
    with pytest.raises(ContractViolation, match="bad"):
        require_finite("bad", np.array([math.inf]))
