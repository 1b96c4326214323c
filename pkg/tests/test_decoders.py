"""Decoders: lookup minimality, MWPM exactness vs brute force, fuzz invariants."""

import itertools

import numpy as np
import pytest

from aqec.decoders import (
    MajorityDecoder,
    MwpmDecoder,
    apply_recovery,
    build_lookup,
    mwpm_decode,
)
from aqec.paulis import (
    PauliOperator,
    Syndrome,
    five_qubit_code,
    logical_class,
    repetition_code,
    syndrome_of,
    toric_code,
)


def random_pauli(rng, n, letters="XYZ", p=0.2):
    ex = ez = 0
    for q in range(n):
        if rng.random() < p:
            letter = letters[rng.integers(len(letters))]
            if letter != "Z":
                ex |= 1 << q
            if letter != "X":
                ez |= 1 << q
    return PauliOperator(n, ex, ez, (ex & ez).bit_count())


# -- lookup ------------------------------------------------------------------


def test_lookup_five_qubit_table():
    code = five_qubit_code()
    dec = build_lookup(code)
    assert len(dec.table) == 16
    assert dec.table[0] == (0, 0)
    # perfect code: every nontrivial syndrome decodes to a weight-1 error
    weights = [PauliOperator(5, cx, cz).weight for s, (cx, cz) in dec.table.items() if s]
    assert weights == [1] * 15
    x0 = PauliOperator.single(5, 0, "X")
    corr = dec.correction(syndrome_of(code, x0))
    assert (corr.x_bits, corr.z_bits) == (x0.x_bits, x0.z_bits)


def test_lookup_correction_syndrome_postcondition():
    code = five_qubit_code()
    dec = build_lookup(code)
    for bits in range(16):
        corr = dec.correction(Syndrome(bits, 4))
        assert syndrome_of(code, corr).bits == bits


def test_lookup_weight_le_radius_corrects():
    # operational Knill-Laflamme: weight <= ell errors recover to class I
    code = five_qubit_code()
    dec = build_lookup(code)
    for q in range(5):
        for letter in "XYZ":
            err = PauliOperator.single(5, q, letter)
            residual, cls = apply_recovery(dec, err)
            assert cls == "I"
            assert syndrome_of(code, residual).is_trivial


def test_lookup_x_basis_repetition():
    code = repetition_code(5)
    dec = build_lookup(code, error_basis="x")
    assert len(dec.table) == 16
    for s, (cx, cz) in dec.table.items():
        assert cz == 0
        assert cx.bit_count() <= 2  # majority radius of n=5


def test_lookup_weight2_coset_class_is_definite():
    code = five_qubit_code()
    dec = build_lookup(code)
    frame = PauliOperator.from_support(5, x_support=(0, 1))
    residual, cls = apply_recovery(dec, frame)
    assert syndrome_of(code, residual).is_trivial
    # weight 2 exceeds the radius; class must be a fixed nontrivial letter
    assert cls in ("X", "Y", "Z")
    again = apply_recovery(dec, frame)[1]
    assert again == cls


def test_majority_matches_lookup():
    code = repetition_code(5)
    maj = MajorityDecoder(code)
    lut = build_lookup(code, error_basis="x")
    for bits in range(16):
        s = Syndrome(bits, 4)
        assert maj.correction(s) == lut.correction(s)


def test_majority_radius():
    code = repetition_code(7)
    dec = MajorityDecoder(code)
    # any <=3 flips recover; 4 flips give a logical X
    frame = PauliOperator.from_support(7, x_support=(0, 2, 5))
    assert apply_recovery(dec, frame)[1] == "I"
    frame = PauliOperator.from_support(7, x_support=(0, 2, 5, 6))
    assert apply_recovery(dec, frame)[1] == "X"


# -- MWPM ---------------------------------------------------------------------


def brute_force_match_cost(dist):
    m = len(dist)
    best = None
    idx = list(range(m))

    def rec(rem, acc):
        nonlocal best
        if not rem:
            best = acc if best is None else min(best, acc)
            return
        i = rem[0]
        for j in rem[1:]:
            rest = [k for k in rem if k not in (i, j)]
            rec(rest, acc + dist[i][j])

    rec(idx, 0)
    return best


@pytest.mark.parametrize("L", [3, 4])
def test_mwpm_cost_matches_brute_force(L):
    code = toric_code(L)
    dec = MwpmDecoder(code)
    rng = np.random.default_rng(5)
    sites = L * L
    for _ in range(60):
        m = int(rng.choice([2, 4, 6]))
        defects = list(rng.choice(sites, size=m, replace=False))
        dist = [[dec._tdist(a, b) for b in defects] for a in defects]
        mask = dec.sector_correction_mask(defects, "star")
        assert mask.bit_count() == brute_force_match_cost(dist)


def test_mwpm_single_pair_adjacent():
    code = toric_code(4)
    dec = MwpmDecoder(code)
    # defects at vertices (0,0) and (0,1) are joined by the single edge h(0,0)
    mask = dec.sector_correction_mask([0, 1], "star")
    assert mask == 1 << 0


def test_mwpm_row_path_tie_break():
    code = toric_code(4)
    dec = MwpmDecoder(code)
    # vertices (0,0) and (0,2): canonical correction is the row-0 path via h(0,0), h(0,1)
    mask = dec.sector_correction_mask([0, 2], "star")
    assert mask == (1 << 0) | (1 << 1)


@pytest.mark.parametrize("L", [3, 4])
def test_mwpm_residual_syndrome_zero_fuzz(L):
    code = toric_code(L)
    dec = MwpmDecoder(code)
    rng = np.random.default_rng(13)
    n = code.n
    for _ in range(400):
        frame = random_pauli(rng, n, p=float(rng.uniform(0.02, 0.4)))
        cx, cz = dec.correction_masks(frame.x_bits, frame.z_bits)
        rx, rz = frame.x_bits ^ cx, frame.z_bits ^ cz
        assert dec.syndrome_bits(rx, rz) == 0


def test_mwpm_from_syndrome_matches_masks():
    code = toric_code(3)
    dec = MwpmDecoder(code)
    rng = np.random.default_rng(3)
    for _ in range(200):
        frame = random_pauli(rng, code.n, p=0.15)
        s = syndrome_of(code, frame)
        via_syndrome = dec.correction(s)
        cx, cz = dec.correction_masks(frame.x_bits, frame.z_bits)
        assert (via_syndrome.x_bits, via_syndrome.z_bits) == (cx, cz)


def test_mwpm_decode_sectors():
    code = toric_code(4)
    x_err = PauliOperator.single(code.n, 5, "X")
    s = syndrome_of(code, x_err)
    corr = mwpm_decode(code, s, "star")
    assert corr.z_bits == 0
    assert syndrome_of(code, corr).bits == s.bits
    z_err = PauliOperator.single(code.n, 5, "Z")
    s = syndrome_of(code, z_err)
    corr = mwpm_decode(code, s, "plaquette")
    assert corr.x_bits == 0
    assert syndrome_of(code, corr).bits == s.bits


def test_mwpm_weight_one_corrects():
    code = toric_code(4)
    dec = MwpmDecoder(code)
    for q in range(code.n):
        for letter in "XYZ":
            _, cls = apply_recovery(dec, PauliOperator.single(code.n, q, letter))
            assert cls == "II"


def test_mwpm_undetectable_logical_loop():
    code = toric_code(4)
    dec = MwpmDecoder(code)
    residual, cls = apply_recovery(dec, code.logical_z[0])
    assert residual == code.logical_z[0]
    assert cls == "ZI"


def test_mwpm_many_defects_uses_blossom():
    code = toric_code(4)
    dec = MwpmDecoder(code)
    rng = np.random.default_rng(99)
    # force > 12 defects so the blossom branch runs; verify residual is clean
    for _ in range(20):
        x_bits = 0
        for q in range(code.n):
            if rng.random() < 0.45:
                x_bits |= 1 << q
        if len(dec.star_defects(x_bits)) <= 12:
            continue
        cx, _ = dec.correction_masks(x_bits, 0)
        assert dec.syndrome_bits(x_bits ^ cx, 0) == 0


# -- fuzz across decoders --------------------------------------------------------


@pytest.mark.parametrize("make,basis", [
    (five_qubit_code, "pauli"),
    (lambda: repetition_code(5), "x"),
])
def test_lookup_fuzz_zero_residual_syndrome(make, basis):
    code = make()
    dec = build_lookup(code, error_basis=basis)
    rng = np.random.default_rng(17)
    letters = "XYZ" if basis == "pauli" else basis.upper()
    for _ in range(2000):
        frame = random_pauli(rng, code.n, letters=letters, p=0.3)
        residual, cls = apply_recovery(dec, frame)
        assert syndrome_of(code, residual).is_trivial
        assert len(cls) == code.k
