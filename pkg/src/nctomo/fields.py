"""GF(2^k) arithmetic, probe-code design, and observation decoding.

On general graphs, XOR probes can cancel when paths re-merge, so edges carry
coefficients from a larger binary extension field.  A code assignment is good
when, for every (source, receiver, receiver-in-edge) triplet, distinct subsets
of surviving paths produce distinct received symbols; then the receiver can
recover the exact path-failure pattern with a table lookup.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._rng import generator
from .topology import Configuration, PathSet, Triplet


class FieldError(ValueError):
    pass


class PathCountError(ValueError):
    """Too many paths in one triplet for exhaustive subset enumeration."""


# Irreducible polynomials over GF(2), bitmask includes the leading term.
# k <= 16 entries are re-verified exhaustively at FieldSpec construction.
DEFAULT_POLYS = {
    1: 0b11,                2: 0b111,               3: 0b1011,
    4: 0b10011,             5: 0b100101,            6: 0b1000011,
    7: 0b10001001,          8: 0b100011011,         9: 0b1000010001,
    10: 0b10000001001,      11: 0b100000000101,     12: 0b1000001010011,
    13: 0b10000000011011,   14: 0b100010001000011,  15: 0b1000000000000011,
    16: 0b10001000000001011,
    17: (1 << 17) | 0b1001,
    18: (1 << 18) | (1 << 7) | 1,
    19: (1 << 19) | 0b100111,
    20: (1 << 20) | 0b1001,
    21: (1 << 21) | 0b101,
    22: (1 << 22) | 0b11,
    23: (1 << 23) | 0b100001,
    24: (1 << 24) | (1 << 7) | 0b111,
    25: (1 << 25) | 0b1001,
    26: (1 << 26) | (1 << 6) | 0b111,
    27: (1 << 27) | (1 << 5) | 0b111,
    28: (1 << 28) | 0b1001,
    29: (1 << 29) | 0b101,
    30: (1 << 30) | (1 << 23) | 0b111,
    31: (1 << 31) | 0b1001,
    32: (1 << 32) | (1 << 22) | 0b111,
}


def _poly_mod_mul(a: int, b: int, poly: int, k: int) -> int:
    """Carry-less multiply then reduce modulo ``poly`` (degree k)."""
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> k:
            a ^= poly
    return res


def _is_irreducible(poly: int, k: int) -> bool:
    """Exhaustive divisor check: no factor of degree 1..k//2 divides poly."""
    for d in range(1, k // 2 + 1):
        for cand in range(1 << d, 1 << (d + 1)):
            # polynomial long division of poly by cand over GF(2)
            rem = poly
            while rem.bit_length() >= cand.bit_length():
                rem ^= cand << (rem.bit_length() - cand.bit_length())
            if rem == 0:
                return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """The field GF(2^k) with an explicit irreducible modulus."""

    k: int
    poly: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= 32:
            raise FieldError(f"field exponent k={self.k} outside [1, 32]")
        if self.poly == 0:
            object.__setattr__(self, "poly", DEFAULT_POLYS[self.k])
        if self.poly.bit_length() != self.k + 1:
            raise FieldError(f"modulus 0x{self.poly:x} does not have degree {self.k}")
        if self.k <= 16 and not _is_irreducible(self.poly, self.k):
            raise FieldError(f"modulus 0x{self.poly:x} is reducible over GF(2)")

    @property
    def q(self) -> int:
        return 1 << self.k

    def _check(self, *ops: int):
        for a in ops:
            if not 0 <= a < self.q:
                raise FieldError(f"operand {a} outside GF(2^{self.k})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        return _poly_mod_mul(a, b, self.poly, self.k)

    def pow(self, a: int, n: int) -> int:
        self._check(a)
        if n < 0:
            raise FieldError("negative exponent")
        res, base = 1, a
        while n:
            if n & 1:
                res = self.mul(res, base)
            base = self.mul(base, base)
            n >>= 1
        return res

    def mul_vec(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Element-wise product of uint64 arrays (vectorized peasant multiply)."""
        a = np.asarray(a, dtype=np.uint64).copy()
        b = np.asarray(b, dtype=np.uint64).copy()
        res = np.zeros(np.broadcast(a, b).shape, dtype=np.uint64)
        a = np.broadcast_to(a, res.shape).copy()
        b = np.broadcast_to(b, res.shape).copy()
        poly = np.uint64(self.poly)
        top = np.uint64(1 << self.k)
        one = np.uint64(1)
        for _ in range(self.k):
            res ^= np.where(b & one, a, np.uint64(0))
            b >>= one
            a <<= one
            a ^= np.where(a & top, poly, np.uint64(0))
        return res


# ---------------------------------------------------------------------------
# code assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodeAssignment:
    """Per-edge field coefficients plus the unit probe payload of each source.

    Source ``i`` injects the i-th unit vector over the field, so its
    contribution stays in coordinate ``i`` of every observed payload and the
    per-source decode problems decouple.
    """

    field_spec: FieldSpec
    coefficients: dict[str, int]
    source_symbols: dict[str, int]  # source node -> payload coordinate

    def __post_init__(self):
        for eid, c in self.coefficients.items():
            if not 1 <= c < self.field_spec.q:
                raise FieldError(f"coefficient for edge {eid!r} must be a nonzero field element")

    def to_json(self) -> str:
        return json.dumps({
            "k": self.field_spec.k,
            "poly": hex(self.field_spec.poly),
            "coefficients": {e: hex(c) for e, c in sorted(self.coefficients.items())},
            "source_symbols": dict(sorted(self.source_symbols.items())),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CodeAssignment":
        data = json.loads(text)
        return cls(FieldSpec(data["k"], int(data["poly"], 16)),
                   {e: int(c, 16) for e, c in data["coefficients"].items()},
                   {s: int(i) for s, i in data["source_symbols"].items()})


def all_ones_assignment(config: Configuration) -> CodeAssignment:
    """The trivial XOR-mode code: every coefficient 1 over GF(2)."""
    return CodeAssignment(
        FieldSpec(1),
        {e.id: 1 for e in config.topology.edges},
        {s: i for i, s in enumerate(config.sources)},
    )


def uniform_random_assignment(config: Configuration, field_spec: FieldSpec,
                              seed: int, attempt: int = 0) -> CodeAssignment:
    rng = generator(seed, 0xC0DE, attempt)
    coeffs = {}
    for e in sorted(config.topology.edges, key=lambda e: e.id):
        coeffs[e.id] = 1 if field_spec.q == 2 else int(rng.integers(1, field_spec.q))
    return CodeAssignment(field_spec, coeffs,
                          {s: i for i, s in enumerate(config.sources)})


def min_alphabet_bound(paths: PathSet) -> int:
    """Smallest admissible field size: the largest number of paths that share
    one receiver in-edge.  Any smaller alphabet cannot give every single
    surviving path a distinct symbol."""
    if not paths.triplets:
        raise ValueError("empty path set")
    return paths.max_paths_per_triplet


def path_monomial(assignment: CodeAssignment, path: tuple[str, ...]) -> int:
    """Product of the coefficients along a path (the scalar factor that the
    source's unit payload picks up end to end)."""
    f = assignment.field_spec
    out = 1
    for eid in path:
        out = f.mul(out, assignment.coefficients[eid])
    return out


# ---------------------------------------------------------------------------
# subset-sum structure of one triplet
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TripletTable:
    """Decode data for one (source, receiver, in-edge) triplet.

    ``achievable`` lists the path-state masks that some combination of link
    failures can produce; ``decode`` maps a received symbol to the candidate
    achievable masks producing it, in ascending mask order.
    """

    paths: tuple[tuple[str, ...], ...]
    monomials: tuple[int, ...]
    achievable: tuple[int, ...]
    decode: dict[int, tuple[int, ...]]

    @property
    def success_ratio(self) -> float:
        return len(self.decode) / len(self.achievable)

    def collisions(self) -> list[tuple[int, int]]:
        out = []
        for masks in self.decode.values():
            if len(masks) > 1:
                first = masks[0]
                out.extend((first, m) for m in masks[1:])
        return out


def _subset_sums(monomials: tuple[int, ...]) -> np.ndarray:
    """XOR subset sums of all 2^n masks, index = mask."""
    n = len(monomials)
    sums = np.zeros(1 << n, dtype=np.uint64)
    for i, p in enumerate(monomials):
        half = 1 << i
        sums[half:2 * half] = sums[:half] ^ np.uint64(p)
    return sums


def _achievable_masks(paths: tuple[tuple[str, ...], ...]) -> np.ndarray:
    """Boolean vector over all 2^n path-state masks: True when some set of
    edge failures yields exactly that set of surviving paths.

    A mask is achievable iff every failed path keeps at least one edge
    outside the union of the surviving paths' edges.
    """
    n = len(paths)
    edge_ids = sorted({e for p in paths for e in p})
    pos = {e: i for i, e in enumerate(edge_ids)}
    path_bits = [sum(1 << pos[e] for e in p) for p in paths]

    masks = np.arange(1 << n, dtype=np.uint64)
    union = np.zeros(1 << n, dtype=np.uint64)
    for i, bits in enumerate(path_bits):
        half = 1 << i
        union[half:2 * half] = union[:half] | np.uint64(bits)

    ok = np.ones(1 << n, dtype=bool)
    for i, bits in enumerate(path_bits):
        failed = (masks >> np.uint64(i)) & np.uint64(1) == 0
        covered = (np.uint64(bits) & ~union) == 0
        ok &= ~(failed & covered)
    return ok


def build_triplet_table(assignment: CodeAssignment,
                        paths: tuple[tuple[str, ...], ...],
                        cap: int = 25) -> TripletTable:
    n = len(paths)
    if n > cap:
        raise PathCountError(
            f"{n} paths in one triplet exceeds the enumeration cap of {cap}")
    monomials = tuple(path_monomial(assignment, p) for p in paths)
    sums = _subset_sums(monomials)
    achievable = np.flatnonzero(_achievable_masks(paths))
    decode: dict[int, list[int]] = {}
    for mask in achievable.tolist():
        decode.setdefault(int(sums[mask]), []).append(mask)
    return TripletTable(
        paths=paths,
        monomials=monomials,
        achievable=tuple(int(m) for m in achievable),
        decode={s: tuple(v) for s, v in sorted(decode.items())},
    )


@dataclass(frozen=True)
class PathTable:
    """Decode tables for every triplet of a path set under one assignment."""

    assignment: CodeAssignment
    tables: dict[Triplet, TripletTable]

    @cached_property
    def success_ratios(self) -> dict[Triplet, float]:
        return {t: tab.success_ratio for t, tab in self.tables.items()}

    @property
    def fully_identifiable(self) -> bool:
        return all(r == 1.0 for r in self.success_ratios.values())


def check_code(assignment: CodeAssignment, paths: PathSet, cap: int = 25) -> PathTable:
    """Build decode tables and per-triplet success ratios for an assignment.

    The success ratio of a triplet is the fraction of achievable path-state
    classes that map to a unique received symbol; 1.0 means the receiver can
    always reconstruct which of its paths worked.
    """
    tables = {t: build_triplet_table(assignment, ps, cap=cap)
              for t, ps in paths.triplets.items()}
    return PathTable(assignment, tables)


@dataclass(frozen=True)
class AssignmentResult:
    assignment: CodeAssignment
    table: PathTable
    attempts: int
    complete: bool  # False when retries were exhausted before full identifiability


def assign_coefficients(config: Configuration, paths: PathSet, field_spec: FieldSpec,
                        seed: int = 0, max_retries: int = 5,
                        cap: int = 25) -> AssignmentResult:
    """Draw coefficients uniformly from the nonzero field elements until every
    triplet decodes uniquely, or retries run out.

    When retries are exhausted the best assignment found (highest mean
    success ratio) is returned flagged ``complete=False``; run-time operation
    is deterministic either way, only this setup step is randomized.
    """
    best: AssignmentResult | None = None
    for attempt in range(max(1, max_retries)):
        assignment = uniform_random_assignment(config, field_spec, seed, attempt)
        table = check_code(assignment, paths, cap=cap)
        result = AssignmentResult(assignment, table, attempt + 1, table.fully_identifiable)
        if result.complete:
            return result
        if best is None or _mean_ratio(table) > _mean_ratio(best.table):
            best = result
    return best


def _mean_ratio(table: PathTable) -> float:
    ratios = list(table.success_ratios.values())
    return sum(ratios) / len(ratios) if ratios else 1.0


# ---------------------------------------------------------------------------
# decoding observations back to path states
# ---------------------------------------------------------------------------

def decode_observation(table: PathTable, received: dict[tuple[str, str], tuple[int, ...]],
                       heuristic: str = "first") -> dict[Triplet, int]:
    """Map received per-edge payloads to a path-state mask per triplet.

    ``received`` maps (receiver, in-edge id) to the payload vector observed
    there; a missing entry or an all-zero vector means nothing useful
    arrived and decodes to the all-failed state.  When several achievable
    masks produce the same symbol the ``heuristic`` picks the answer:
    ``first`` (lowest mask), ``union`` or ``intersection`` of the candidates.
    """
    if heuristic not in ("first", "union", "intersection"):
        raise ValueError(f"unknown ambiguity heuristic {heuristic!r}")
    out: dict[Triplet, int] = {}
    for triplet, tab in table.tables.items():
        source, receiver, e_r = triplet
        payload = received.get((receiver, e_r))
        coord = table.assignment.source_symbols[source]
        symbol = 0 if payload is None else int(payload[coord])
        if symbol not in tab.decode:
            raise FieldError(
                f"received symbol {symbol:#x} not producible for triplet {triplet}"
                " (assignment/observation mismatch)")
        candidates = tab.decode[symbol]
        if len(candidates) == 1 or heuristic == "first":
            out[triplet] = candidates[0]
        elif heuristic == "union":
            mask = 0
            for m in candidates:
                mask |= m
            out[triplet] = mask
        else:
            mask = candidates[0]
            for m in candidates[1:]:
                mask &= m
            out[triplet] = mask
    return out
