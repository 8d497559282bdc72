from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from isingtune.problems import encode_tsp, permutation_assignment
from isingtune.qubo import Bqp, DimensionError, energy, is_feasible, penalty_energy, upper_triangular

from conftest import all_bit_vectors, random_tsp, tsp_formula_energy


def small_bqp() -> Bqp:
    return Bqp.from_triplets(3, [(0, 0, 5), (1, 1, -2), (0, 1, 3), (2, 1, 4), (2, 2, 7)])


def test_zero_assignment_has_zero_energy():
    bqp = small_bqp()
    assert energy(bqp, [0, 0, 0]) == 0


@pytest.mark.parametrize("i, expected", [(0, 5), (1, -2), (2, 7)])
def test_single_bit_picks_diagonal(i, expected):
    bits = np.zeros(3, dtype=int)
    bits[i] = 1
    assert energy(small_bqp(), bits) == expected


def test_lower_triplets_fold_onto_upper():
    bqp = small_bqp()
    assert bqp.q_obj[1, 2] == 4
    assert bqp.q_obj[2, 1] == 0
    assert energy(bqp, [0, 1, 1]) == -2 + 7 + 4


def test_duplicates_are_summed():
    bqp = Bqp.from_triplets(2, [(0, 1, 2), (1, 0, 3)])
    assert bqp.q_obj[0, 1] == 5
    assert energy(bqp, [1, 1]) == 5


def test_three_city_tour_energy_matches_tour_length():
    dist = np.array([[0, 4, 7], [4, 0, 2], [7, 2, 0]])
    from isingtune.problems import TspInstance

    bqp = encode_tsp(TspInstance(3, dist))
    bits = permutation_assignment([0, 1, 2])
    assert energy(bqp, bits) == 4 + 2 + 7
    # every one of the 2^9 assignments agrees with the direct double sum
    for x in all_bit_vectors(9):
        assert energy(bqp, x) == tsp_formula_energy(dist, x)


def test_dimension_errors():
    bqp = small_bqp()
    with pytest.raises(DimensionError):
        energy(bqp, [1, 0])
    with pytest.raises(DimensionError):
        penalty_energy(bqp, [1, 0, 0, 1])
    with pytest.raises(DimensionError):
        is_feasible(bqp, [])


def test_non_binary_assignment_rejected():
    with pytest.raises(ValueError):
        energy(small_bqp(), [0, 2, 0])


def test_penalty_zero_on_permutation_and_2n_on_zero_vector():
    rng = np.random.default_rng(3)
    for n in (3, 4, 5):
        bqp = encode_tsp(random_tsp(n, rng))
        assert penalty_energy(bqp, permutation_assignment(rng.permutation(n))) == 0
        assert penalty_energy(bqp, np.zeros(n * n, dtype=int)) == 2 * n


def test_duplicated_city_in_slot_is_penalised():
    bqp = encode_tsp(random_tsp(3, np.random.default_rng(0)))
    bits = permutation_assignment([0, 1, 2])
    bits[1 * 3 + 0] = 1  # city 1 also in slot 0
    assert penalty_energy(bqp, bits) > 0
    assert not is_feasible(bqp, bits)


def test_feasibility_with_inequality():
    bqp = Bqp.from_triplets(3, [(0, 0, 1)], inequalities=[((1, 1, 1), 1)])
    assert is_feasible(bqp, [1, 0, 0])
    assert not is_feasible(bqp, [1, 1, 0])


def test_feasible_permutation_without_inequalities():
    bqp = encode_tsp(random_tsp(4, np.random.default_rng(1)))
    assert is_feasible(bqp, permutation_assignment([2, 0, 3, 1]))


def test_inequality_weights_must_match_num_vars():
    with pytest.raises(DimensionError):
        Bqp.from_triplets(3, [], inequalities=[((1, 1), 1)])


def test_out_of_range_index_rejected():
    with pytest.raises(IndexError):
        upper_triangular([0], [3], [1], 3)


def test_exact_for_large_coefficients():
    big = 2**40
    bqp = Bqp.from_triplets(2, [(0, 0, big), (0, 1, big), (1, 1, -3)])
    assert energy(bqp, [1, 1]) == 2 * big - 3


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=2, max_value=12))
def test_upper_and_lower_storage_agree(seed, m):
    rng = np.random.default_rng(seed)
    dense = np.triu(rng.integers(-20, 20, size=(m, m)))
    upper = Bqp(m, sp.csr_matrix(dense))
    lower = Bqp(m, sp.csr_matrix(dense.T))
    xs = rng.integers(0, 2, size=(1000, m))
    for x in xs[:40]:
        assert energy(upper, x) == energy(lower, x)
    # full symmetric expansion (halved off-diagonals) gives the same quadratic form
    sym = [[Fraction(int(dense[i, j] + dense[j, i]), 2) for j in range(m)] for i in range(m)]
    for i in range(m):
        sym[i][i] = Fraction(int(dense[i, i]))
    for x in xs[:10]:
        full = sum(sym[i][j] * int(x[i]) * int(x[j]) for i in range(m) for j in range(m))
        assert full == energy(upper, x)


def test_storage_symmetry_on_thousand_assignments():
    rng = np.random.default_rng(11)
    m = 16
    dense = np.triu(rng.integers(-50, 50, size=(m, m)))
    upper = Bqp(m, sp.csr_matrix(dense))
    lower = Bqp(m, sp.csr_matrix(dense.T))
    xs = rng.integers(0, 2, size=(1000, m))
    assert [energy(upper, x) for x in xs] == [energy(lower, x) for x in xs]


def test_penalty_nonnegative_on_encoder_output():
    rng = np.random.default_rng(5)
    bqp = encode_tsp(random_tsp(3, rng))
    values = [penalty_energy(bqp, x) for x in all_bit_vectors(9)]
    assert min(values) == 0
    assert all(v >= 0 for v in values)
