"""Associative scan over affine maps.

An AffineElement (F, c) stands for the map z -> F z + c. Composing two of
them in time order gives another affine map, so the set forms a monoid and
all partial compositions of a sequence can be computed with a parallel
prefix scan in O(log N) dependency depth.

To run the recursion z_{k+1} = F_k z_k + c_k from a known z_0, build the
element list with init_elements (the first element folds z_0 in and zeroes
its matrix part), scan, and read the states off the prefix offsets with
extract_states. The k = 0 state is not part of the scan output; callers
prepend it themselves.

The list-based functions here are the reference implementation and keep the
operator instrumentable (scan_parallel accepts a combine_fn override so a
test can count dependency depth). The compiled array-form scan used by the
solver hot path lives in _kernels and is checked against scan_sequential.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AffineElement",
    "identity",
    "combine",
    "init_elements",
    "scan_sequential",
    "scan_parallel",
    "extract_states",
]


@dataclass(frozen=True, eq=False)
class AffineElement:
    """The map z -> F z + c. F is (d, d), c is (d,)."""

    F: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError(f"F must be square, got shape {F.shape}")
        if c.ndim != 1 or c.shape[0] != F.shape[0]:
            raise ValueError(
                f"c must be a vector matching F: F is {F.shape}, c is {c.shape}"
            )
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.F.shape[0]


def identity(dim: int) -> AffineElement:
    """The neutral element z -> z."""
    return AffineElement(np.eye(dim), np.zeros(dim))


def combine(earlier: AffineElement, later: AffineElement) -> AffineElement:
    """Compose two elements in time order: apply earlier first, later second.

    The result is (later.F @ earlier.F, later.F @ earlier.c + later.c). Note
    the argument order: the element covering the earlier time span comes
    first, which is the reverse of function-composition notation.
    """
    if earlier.dim != later.dim:
        raise ValueError(
            f"dimension mismatch: earlier is {earlier.dim}-dim, later is {later.dim}-dim"
        )
    return AffineElement(
        later.F @ earlier.F,
        later.F @ earlier.c + later.c,
    )


def init_elements(F_seq, c_seq, z0) -> list:
    """Elements whose inclusive scan yields the recursion states z_1..z_N.

    Element 0 is (0, F_0 z_0 + c_0): zeroing the matrix part pins the scan to
    the concrete initial state, and the zero propagates so every prefix has a
    zero matrix part (its offset IS the state).
    """
    if len(F_seq) != len(c_seq):
        raise ValueError(
            f"F_seq and c_seq lengths differ: {len(F_seq)} vs {len(c_seq)}"
        )
    if len(F_seq) == 0:
        raise ValueError("need at least one step")
    z0 = np.asarray(z0, dtype=np.float64)
    F0 = np.asarray(F_seq[0], dtype=np.float64)
    if z0.ndim != 1 or z0.shape[0] != F0.shape[0]:
        raise ValueError(
            f"z0 has shape {z0.shape}, expected ({F0.shape[0]},)"
        )
    d = z0.shape[0]
    out = [AffineElement(np.zeros((d, d)), F0 @ z0 + np.asarray(c_seq[0], dtype=np.float64))]
    for F, c in zip(F_seq[1:], c_seq[1:]):
        out.append(AffineElement(np.asarray(F, float), np.asarray(c, float)))
    return out


def scan_sequential(elements) -> list:
    """Left-to-right inclusive fold: output[k] = elements[0] (*) ... (*) elements[k]."""
    if len(elements) == 0:
        raise ValueError("cannot scan an empty sequence")
    out = [elements[0]]
    for e in elements[1:]:
        out.append(combine(out[-1], e))
    return out


def scan_parallel(elements, combine_fn=combine) -> list:
    """Inclusive scan with O(log N) combine depth (up-sweep/down-sweep tree).

    Matches scan_sequential up to floating-point reassociation. The input is
    padded to a power of two with identity elements, which is exact: folding
    an identity changes no entry. combine_fn exists so tests can instrument
    the operator; it must implement the same (earlier, later) contract.
    """
    n = len(elements)
    if n == 0:
        raise ValueError("cannot scan an empty sequence")
    if n == 1:
        return [elements[0]]
    d = elements[0].dim
    m = 1
    while m < n:
        m *= 2
    ident = identity(d)
    work = list(elements) + [ident] * (m - n)

    # Up-sweep: position j accumulates the fold of the block it roots.
    step = 1
    while step < m:
        for j in range(2 * step - 1, m, 2 * step):
            work[j] = combine_fn(work[j - step], work[j])
        step *= 2

    # Down-sweep: turn the tree into an exclusive scan.
    work[m - 1] = ident
    step = m // 2
    while step >= 1:
        for j in range(2 * step - 1, m, 2 * step):
            left_total = work[j - step]
            work[j - step] = work[j]
            work[j] = combine_fn(work[j], left_total)
        step //= 2

    # Fold each element onto its exclusive prefix.
    return [combine_fn(work[k], elements[k]) for k in range(n)]


def extract_states(prefixes) -> list:
    """States z_1..z_N from scanned init_elements output.

    Valid because the first element's zero matrix part propagates through
    every prefix, leaving the offset equal to the state itself.
    """
    return [p.c for p in prefixes]


def elements_to_arrays(elements):
    """Stack an element list into (N, d, d) and (N, d) arrays for the kernels."""
    n = len(elements)
    d = elements[0].dim
    F = np.empty((n, d, d))
    c = np.empty((n, d))
    for k, e in enumerate(elements):
        F[k] = e.F
        c[k] = e.c
    return F, c


def arrays_to_elements(F, c):
    """Inverse of elements_to_arrays."""
    return [AffineElement(F[k].copy(), c[k].copy()) for k in range(c.shape[0])]
