"""Recovery maps: syndrome -> minimum-weight correction.

Three decoder kinds: exhaustive lookup tables for small codes, exact
minimum-weight perfect matching for the toric code (X and Z sectors decoded
independently), and closed-form majority vote for the repetition code.
Every decoder guarantees correction(s) has syndrome exactly s, so the frame
after recovery is a zero-syndrome logical representative.

All tie-breaking is deterministic: lookup enumerates candidates by
(weight, x_bits, z_bits) ascending; matching keeps the lowest-index partner
among equal-cost pairings; paths run the vertical leg first, then the
horizontal leg, and wrap toward increasing coordinates on exact-half ties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx

from .paulis import (
    PauliOperator,
    StabilizerCode,
    Syndrome,
    logical_class,
    multiply,
    syndrome_of,
)

__all__ = [
    "Decoder",
    "build_lookup",
    "MwpmDecoder",
    "MajorityDecoder",
    "mwpm_decode",
    "apply_recovery",
]

_LOOKUP_SYNDROME_CAP = 24  # 2^(n-k) table entries; hard memory budget

_BASIS_LETTERS = {"x": "X", "z": "Z", "pauli": "XYZ"}


def _anticommute_bit(gx: int, gz: int, ex: int, ez: int) -> int:
    return ((gx & ez).bit_count() + (gz & ex).bit_count()) & 1


class Decoder:
    """Base: bind a code and map syndromes to corrections."""

    kind = "abstract"

    def __init__(self, code: StabilizerCode):
        self.code = code
        # generator masks for fast syndrome computation from raw frame bits
        self._gen_masks = [(g.x_bits, g.z_bits) for g in code.generators]

    def syndrome_bits(self, x_bits: int, z_bits: int) -> int:
        bits = 0
        for a, (gx, gz) in enumerate(self._gen_masks):
            bits |= _anticommute_bit(gx, gz, x_bits, z_bits) << a
        return bits

    def correction(self, s: Syndrome) -> PauliOperator:
        raise NotImplementedError

    def correction_masks(self, x_bits: int, z_bits: int) -> tuple:
        """Hot-path variant: correction (x, z) masks for a raw frame."""
        s = Syndrome(self.syndrome_bits(x_bits, z_bits), len(self._gen_masks))
        c = self.correction(s)
        return c.x_bits, c.z_bits


class LookupDecoder(Decoder):
    kind = "lookup"

    def __init__(self, code: StabilizerCode, table: dict):
        super().__init__(code)
        self.table = table  # syndrome bits -> (corr_x, corr_z)

    def correction(self, s: Syndrome) -> PauliOperator:
        try:
            cx, cz = self.table[s.bits]
        except KeyError:
            raise ValueError(f"syndrome {s} unreachable in the decoder's error basis")
        return PauliOperator(self.code.n, cx, cz, (cx & cz).bit_count())

    def correction_masks(self, x_bits: int, z_bits: int) -> tuple:
        return self.table[self.syndrome_bits(x_bits, z_bits)]


def build_lookup(code: StabilizerCode, error_basis: str = "pauli") -> LookupDecoder:
    """Exhaustive minimum-weight lookup table over the chosen error basis.

    Parameters
    ----------
    error_basis : {"pauli", "x", "z"}
        Letters allowed in candidate corrections.

    Enumeration is breadth-first over error weight; within a weight, candidates
    are visited in ascending (x_bits, z_bits) order, so the stored
    representative is the lexicographically smallest minimum-weight coset
    leader.  Raises if the table would exceed 2^24 entries.
    """
    letters = _BASIS_LETTERS[error_basis]
    n_gen = len(code.generators)
    if n_gen > _LOOKUP_SYNDROME_CAP:
        raise ValueError(f"lookup table with 2^{n_gen} entries exceeds budget")
    n = code.n
    gen_masks = [(g.x_bits, g.z_bits) for g in code.generators]

    def syndrome_bits(ex, ez):
        bits = 0
        for a, (gx, gz) in enumerate(gen_masks):
            bits |= _anticommute_bit(gx, gz, ex, ez) << a
        return bits

    # syndromes unreachable in this basis simply stay absent from the table
    table = {0: (0, 0)}
    target = 1 << n_gen
    for w in range(1, n + 1):
        if len(table) == target:
            break
        candidates = []
        for qubits in itertools.combinations(range(n), w):
            for assign in itertools.product(letters, repeat=w):
                ex = ez = 0
                for q, letter in zip(qubits, assign):
                    if letter != "Z":
                        ex |= 1 << q
                    if letter != "X":
                        ez |= 1 << q
                candidates.append((ex, ez))
        for ex, ez in sorted(candidates):
            s = syndrome_bits(ex, ez)
            if s not in table:
                table[s] = (ex, ez)
    return LookupDecoder(code, table)


class MajorityDecoder(Decoder):
    """Closed-form majority vote for the bit-flip repetition code."""

    kind = "majority"

    def __init__(self, code: StabilizerCode):
        if not code.name.startswith("repetition"):
            raise ValueError("majority decoding requires a repetition code")
        super().__init__(code)
        self._full = (1 << code.n) - 1

    def correction(self, s: Syndrome) -> PauliOperator:
        cx, cz = self._from_syndrome(s.bits)
        return PauliOperator(self.code.n, cx, cz, 0)

    def _from_syndrome(self, bits: int) -> tuple:
        # reconstruct the X-error pattern with e_0 = 0 from boundary parities,
        # then pick the lighter of the two cosets (n odd => never a tie)
        n = self.code.n
        e = 0
        cur = 0
        for i in range(n - 1):
            cur ^= (bits >> i) & 1
            e |= cur << (i + 1)
        if e.bit_count() > n // 2:
            e ^= self._full
        return e, 0

    def correction_masks(self, x_bits: int, z_bits: int) -> tuple:
        # Z errors are invisible to this decoder: correct X majority only
        n = self.code.n
        e = x_bits if x_bits.bit_count() <= n // 2 else x_bits ^ self._full
        return e, 0


# -- toric MWPM --------------------------------------------------------------

_DP_DEFECT_CAP = 12  # bitmask DP up to 2^12 subsets; blossom above


def _dp_min_matching(dist) -> list:
    """Exact minimum-weight perfect matching by subset DP (integer costs).

    Returns pairs (i, j).  Deterministic: subsets are filled in increasing
    numeric order, the lowest set bit anchors each subset, and the first
    partner achieving the minimum is kept.
    """
    m = len(dist)
    full = (1 << m) - 1
    best = [None] * (full + 1)
    choice = [0] * (full + 1)
    best[0] = 0
    for s in range(3, full + 1):
        if s.bit_count() & 1:
            continue
        i = (s & -s).bit_length() - 1
        rest = s ^ (1 << i)
        b = None
        ch = -1
        t = rest
        while t:
            j = (t & -t).bit_length() - 1
            t ^= 1 << j
            sub = best[s ^ (1 << i) ^ (1 << j)]
            if sub is None:
                continue
            c = dist[i][j] + sub
            if b is None or c < b:
                b, ch = c, j
        best[s] = b
        choice[s] = ch
    pairs = []
    s = full
    while s:
        i = (s & -s).bit_length() - 1
        j = choice[s]
        pairs.append((i, j))
        s ^= (1 << i) | (1 << j)
    return pairs


def _blossom_min_matching(dist) -> list:
    m = len(dist)
    g = nx.Graph()
    for i in range(m):
        for j in range(i + 1, m):
            g.add_edge(i, j, weight=dist[i][j])
    match = nx.min_weight_matching(g)
    return sorted(tuple(sorted(p)) for p in match)


class MwpmDecoder(Decoder):
    """Exact MWPM for the L x L toric code, X and Z sectors independent.

    Star defects (from X-type frame bits) are paired by toroidal Manhattan
    distance and joined with X-strings on the primal lattice; plaquette
    defects (from Z-type bits) are paired the same way on the dual lattice
    and joined with Z-strings.
    """

    kind = "mwpm"

    def __init__(self, code: StabilizerCode):
        super().__init__(code)
        L = round((code.n / 2) ** 0.5)
        if 2 * L * L != code.n or not code.name.startswith("toric"):
            raise ValueError("MwpmDecoder requires a toric code")
        self.L = L
        n2 = L * L
        # star masks in vertex row-major order; plaquette masks face row-major
        self._star_mask = []
        self._plaq_mask = []
        for r in range(L):
            for c in range(L):
                self._star_mask.append(
                    (1 << self._h(r, c - 1)) | (1 << self._h(r, c))
                    | (1 << self._v(r - 1, c)) | (1 << self._v(r, c)))
                self._plaq_mask.append(
                    (1 << self._h(r, c)) | (1 << self._h(r + 1, c))
                    | (1 << self._v(r, c)) | (1 << self._v(r, c + 1)))
        self._n_sites = n2

    def _h(self, r, c):
        L = self.L
        return (r % L) * L + (c % L)

    def _v(self, r, c):
        L = self.L
        return L * L + (r % L) * L + (c % L)

    # -- defect extraction ---------------------------------------------------

    def star_defects(self, x_bits: int) -> list:
        return [s for s in range(self._n_sites)
                if (self._star_mask[s] & x_bits).bit_count() & 1]

    def plaquette_defects(self, z_bits: int) -> list:
        return [p for p in range(self._n_sites)
                if (self._plaq_mask[p] & z_bits).bit_count() & 1]

    def _defects_from_syndrome(self, bits: int, sector: str) -> list:
        # generator order drops the last vertex/face; restore it by parity
        n_stars = self._n_sites - 1
        offset = 0 if sector == "star" else n_stars
        defects = [i for i in range(n_stars) if (bits >> (offset + i)) & 1]
        if len(defects) & 1:
            defects.append(self._n_sites - 1)
        return defects

    # -- geometry --------------------------------------------------------------

    def _leg(self, a: int, b: int) -> tuple:
        """Signed step count from coordinate a to b on the ring (shorter way).

        Exact half-distance ties resolve toward increasing coordinates.
        """
        L = self.L
        fwd = (b - a) % L
        bwd = (a - b) % L
        return (fwd, +1) if fwd <= bwd else (bwd, -1)

    def _tdist(self, s1: int, s2: int) -> int:
        r1, c1 = divmod(s1, self.L)
        r2, c2 = divmod(s2, self.L)
        return self._leg(r1, r2)[0] + self._leg(c1, c2)[0]

    def _primal_path(self, s1: int, s2: int) -> int:
        """Edge mask of the canonical primal path: vertical leg then horizontal."""
        r1, c1 = divmod(s1, self.L)
        r2, c2 = divmod(s2, self.L)
        mask = 0
        steps, sgn = self._leg(r1, r2)
        r = r1
        for _ in range(steps):
            mask ^= 1 << (self._v(r, c1) if sgn > 0 else self._v(r - 1, c1))
            r += sgn
        steps, sgn = self._leg(c1, c2)
        c = c1
        for _ in range(steps):
            mask ^= 1 << (self._h(r2, c) if sgn > 0 else self._h(r2, c - 1))
            c += sgn
        return mask

    def _dual_path(self, f1: int, f2: int) -> int:
        """Edge mask of the canonical dual path between faces."""
        r1, c1 = divmod(f1, self.L)
        r2, c2 = divmod(f2, self.L)
        mask = 0
        steps, sgn = self._leg(r1, r2)
        r = r1
        for _ in range(steps):
            # dual step down from face (r, c) crosses h(r+1, c); up crosses h(r, c)
            mask ^= 1 << (self._h(r + 1, c1) if sgn > 0 else self._h(r, c1))
            r += sgn
        steps, sgn = self._leg(c1, c2)
        c = c1
        for _ in range(steps):
            # dual step right from face (r, c) crosses v(r, c+1); left crosses v(r, c)
            mask ^= 1 << (self._v(r2, c + 1) if sgn > 0 else self._v(r2, c))
            c += sgn
        return mask

    # -- matching ---------------------------------------------------------------

    def _match(self, defects: list) -> list:
        m = len(defects)
        if m == 0:
            return []
        if m % 2:
            raise ValueError("odd defect count; syndrome not error-generated")
        dist = [[self._tdist(a, b) for b in defects] for a in defects]
        pairs = _dp_min_matching(dist) if m <= _DP_DEFECT_CAP else _blossom_min_matching(dist)
        return [(defects[i], defects[j]) for i, j in pairs]

    def sector_correction_mask(self, defects: list, sector: str) -> int:
        path = self._primal_path if sector == "star" else self._dual_path
        mask = 0
        for a, b in self._match(defects):
            mask ^= path(a, b)
        return mask

    def correction_masks(self, x_bits: int, z_bits: int) -> tuple:
        cx = self.sector_correction_mask(self.star_defects(x_bits), "star")
        cz = self.sector_correction_mask(self.plaquette_defects(z_bits), "plaquette")
        return cx, cz

    def correction(self, s: Syndrome) -> PauliOperator:
        cx = self.sector_correction_mask(self._defects_from_syndrome(s.bits, "star"), "star")
        cz = self.sector_correction_mask(self._defects_from_syndrome(s.bits, "plaquette"), "plaquette")
        return PauliOperator(self.code.n, cx, cz, (cx & cz).bit_count())


def mwpm_decode(code: StabilizerCode, s: Syndrome, sector: str) -> PauliOperator:
    """Matching correction for one sector ("star" -> X string, "plaquette" -> Z)."""
    if sector not in ("star", "plaquette"):
        raise ValueError("sector must be 'star' or 'plaquette'")
    dec = MwpmDecoder(code)
    defects = dec._defects_from_syndrome(s.bits, sector)
    mask = dec.sector_correction_mask(defects, sector)
    if sector == "star":
        return PauliOperator(code.n, mask, 0, 0)
    return PauliOperator(code.n, 0, mask, 0)


def apply_recovery(dec: Decoder, frame: PauliOperator) -> tuple:
    """Correct an accumulated error frame.

    Returns (residual, logical) where residual = correction * frame has zero
    syndrome and logical is its class, one letter per logical qubit.
    """
    s = syndrome_of(dec.code, frame)
    corr = dec.correction(s)
    residual = multiply(corr, frame)
    return residual, logical_class(dec.code, residual)
