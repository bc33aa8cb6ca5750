"""Solved-grid census for 9×9 boards.

The space of solved grids is indexed through its top band (rows 1-3):

* box 1 is canonicalized by digit relabeling (9! relabelings per band);
* the 2,612,736 completions of boxes 2 and 3 are enumerated outright;
* bands are grouped into equivalence classes under count-preserving
  symmetries: within-box column permutations, the box-2/box-3 swap, and
  within-band row permutations, each followed by the relabeling that
  restores a canonical box 1;
* one representative per class gets an exact count of full-grid completions.

Grid completions of a fixed band are counted without enumerating them: for
each box, rows 4-6 take 3 of the 6 digits missing from each column (56 ways
to orient the missing digits per box), and once those column sets are fixed,
arranging a box into rows is choosing an ordered tripartition of the digits
that is transversal to the column sets (216 ways per box); across boxes the
tripartitions must be row-wise disjoint. Rows 7-9 factor the same way with
the complementary column sets, so

    completions(band) = sum over orientations of A(band-2 sets) * A(band-3 sets)

where A counts mutually orthogonal valid tripartition triples. A is computed
for all 56^3 orientation triples at once with two small matrix products over
a precomputed orthogonal-tripartition table. All intermediate values are
integers well below 2^24 (band arrangement counts), so float32 matmuls are
exact; the final accumulations run in float64 and stay below 2^53.

Ranks order grids by (class, class member, completion), so rank/unrank need
only the class table plus a per-band recount (seconds), never the full grid
list.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import time
from typing import Optional

import numpy as np
from numba import njit

from .board import Board
from .generator import Census, CensusClass

N3_TOTAL = 6670903752021072936960
BAND_COMPLETIONS = 2612736
FACT9 = 362880

_BOX1_POS = [r * 9 + c for r in range(3) for c in range(3)]
_NONBOX1_POS = [r * 9 + c for r in range(3) for c in range(3, 9)]

MAGIC = b"TBCENS01"


# --------------------------------------------------------------------------
# band enumeration


def _row_perms(digits):
    return [np.array(p, np.uint8) for p in itertools.permutations(digits)]


def enumerate_bands() -> np.ndarray:
    """All completions of boxes 2 and 3 next to a canonical box 1.

    Returns an int array of shape (2612736, 27): rows 1-3 of the band,
    row-major over all 9 columns.
    """
    box1 = np.arange(1, 10, dtype=np.uint8).reshape(3, 3)
    row_missing = [np.setdiff1d(np.arange(1, 10, dtype=np.uint8), box1[r]) for r in range(3)]
    perms = [np.stack(_row_perms(row_missing[r])) for r in range(3)]  # (720, 6) each

    def masks(p):
        b2 = np.zeros(len(p), np.uint16)
        b3 = np.zeros(len(p), np.uint16)
        for k in range(3):
            b2 |= np.uint16(1) << (p[:, k] - 1).astype(np.uint16)
            b3 |= np.uint16(1) << (p[:, 3 + k] - 1).astype(np.uint16)
        return b2, b3

    b2 = [None] * 3
    b3 = [None] * 3
    for r in range(3):
        b2[r], b3[r] = masks(perms[r])
    # bucket row-3 arrangements by their (box2, box3) digit sets
    buckets: dict = {}
    for k in range(720):
        buckets.setdefault((int(b2[2][k]), int(b3[2][k])), []).append(k)

    full = (1 << 9) - 1
    I = []
    J = []
    Ks = []
    for i in range(720):
        ok = ((b2[0][i] & b2[1]) == 0) & ((b3[0][i] & b3[1]) == 0)
        for j in np.flatnonzero(ok):
            need2 = full ^ int(b2[0][i]) ^ int(b2[1][j])
            need3 = full ^ int(b3[0][i]) ^ int(b3[1][j])
            ks = buckets.get((need2, need3))
            if ks:
                for k in ks:
                    I.append(i)
                    J.append(j)
                    Ks.append(k)
    I = np.array(I, np.int32)
    J = np.array(J, np.int32)
    Ks = np.array(Ks, np.int32)
    nb = len(I)
    bands = np.empty((nb, 27), np.uint8)
    for r in range(3):
        bands[:, r * 9:r * 9 + 3] = box1[r]
    bands[:, 3:9] = perms[0][I]
    bands[:, 12:18] = perms[1][J]
    bands[:, 21:27] = perms[2][Ks]
    return bands


# --------------------------------------------------------------------------
# symmetry canonicalization


def _build_transforms():
    """Flat gather indices for the 7776 within-band symmetries.

    A transform permutes rows (6), permutes the three boxes (6, which
    includes the box-2/box-3 swap), and permutes columns within each box
    (6^3), then relabels digits so box 1 is canonical again. The relabeling
    depends on the band, so it is applied separately; the index arrays here
    only implement the cell rearrangement.
    """
    transforms = []
    cols3 = list(itertools.permutations(range(3)))
    rows3 = list(itertools.permutations(range(3)))
    boxes3 = list(itertools.permutations(range(3)))
    for rho in rows3:
        for beta in boxes3:
            for p0 in cols3:
                for p1 in cols3:
                    for p2 in cols3:
                        perms = (p0, p1, p2)
                        idx = np.empty(27, np.int64)
                        for r in range(3):
                            for c in range(9):
                                blk, off = divmod(c, 3)
                                src = beta[blk] * 3 + perms[blk][off]
                                idx[r * 9 + c] = rho[r] * 9 + src
                        transforms.append(idx)
    return transforms


_TRANSFORMS = None


def transforms():
    global _TRANSFORMS
    if _TRANSFORMS is None:
        _TRANSFORMS = _build_transforms()
    return _TRANSFORMS


def _pack_keys(bands: np.ndarray):
    """Pack the 18 non-box-1 cells into (hi, lo) uint64 pairs, 4 bits/cell."""
    hi = np.zeros(len(bands), np.uint64)
    lo = np.zeros(len(bands), np.uint64)
    for k in range(9):
        hi |= bands[:, _NONBOX1_POS[k]].astype(np.uint64) << np.uint64(4 * k)
        lo |= bands[:, _NONBOX1_POS[9 + k]].astype(np.uint64) << np.uint64(4 * k)
    return hi, lo


def _unpack_key(hi: int, lo: int) -> np.ndarray:
    band = np.empty(27, np.uint8)
    for r in range(3):
        band[r * 9:r * 9 + 3] = np.arange(3 * r + 1, 3 * r + 4)
    for k in range(9):
        band[_NONBOX1_POS[k]] = (hi >> (4 * k)) & 0xF
        band[_NONBOX1_POS[9 + k]] = (lo >> (4 * k)) & 0xF
    return band


_CANON_VALS = np.array([3 * r + c + 1 for r in range(3) for c in range(3)], np.uint8)


def _relabel_canonical(tb: np.ndarray) -> np.ndarray:
    """Relabel each band so its box 1 reads 1..9 row-major."""
    nb = tb.shape[0]
    lut = np.zeros((nb, 10), np.uint8)
    rows = np.arange(nb)[:, None]
    lut[rows, tb[:, _BOX1_POS]] = _CANON_VALS[None, :]
    return lut[rows, tb]


def canonical_keys(bands: np.ndarray, progress: Optional[callable] = None):
    """Minimum packed key over all symmetries, per band."""
    best_hi, best_lo = _pack_keys(_relabel_canonical(bands))
    buf = np.empty_like(bands)
    for t, idx in enumerate(transforms()):
        np.take(bands, idx, axis=1, out=buf)
        hi, lo = _pack_keys(_relabel_canonical(buf))
        better = (hi < best_hi) | ((hi == best_hi) & (lo < best_lo))
        np.copyto(best_hi, hi, where=better)
        np.copyto(best_lo, lo, where=better)
        if progress is not None and (t + 1) % 512 == 0:
            progress(t + 1, len(transforms()))
    return best_hi, best_lo


def canonical_key_single(band: np.ndarray):
    hi, lo = canonical_keys(band.reshape(1, 27).astype(np.uint8))
    return int(hi[0]), int(lo[0])


# --------------------------------------------------------------------------
# completion counting


def _build_partitions():
    """All 1680 ordered tripartitions of the 9 digits into 3-subsets.

    Returns (masks1, masks2) per partition plus a (512*512) index table
    keyed by mask1*512+mask2, and the orthogonal-pair table: for each
    partition index k, the 56 pairs (i, j) with partitions i, j, k mutually
    row-wise disjoint (k is then the componentwise complement of i and j).
    """
    full = (1 << 9) - 1
    subsets3 = [m for m in range(512) if bin(m).count("1") == 3]
    parts = []
    for a in subsets3:
        rest = full ^ a
        for b in subsets3:
            if b & a == 0 and (rest ^ b) and bin(rest ^ b).count("1") == 3:
                parts.append((a, b))
    assert len(parts) == 1680
    m1 = np.array([p[0] for p in parts], np.uint16)
    m2 = np.array([p[1] for p in parts], np.uint16)
    index = np.full(512 * 512, -1, np.int32)
    for i, (a, b) in enumerate(parts):
        index[a * 512 + b] = i
    pair_i = np.empty((1680, 56), np.int32)
    pair_j = np.empty((1680, 56), np.int32)
    fill = np.zeros(1680, np.int32)
    for i, (a1, b1) in enumerate(parts):
        c1 = full ^ a1 ^ b1
        for j, (a2, b2) in enumerate(parts):
            if a1 & a2 or b1 & b2:
                continue
            c2 = full ^ a2 ^ b2
            if c1 & c2:
                continue
            k = index[(full ^ a1 ^ a2) * 512 + (full ^ b1 ^ b2)]
            pair_i[k, fill[k]] = i
            pair_j[k, fill[k]] = j
            fill[k] += 1
    assert (fill == 56).all()
    return m1, m2, index, pair_i, pair_j


_PARTS = None


def partitions():
    global _PARTS
    if _PARTS is None:
        _PARTS = _build_partitions()
    return _PARTS


@njit(cache=True)
def _profiles_for_sets(s0, s1, s2, index, out):
    """Mark the 216 tripartitions transversal to disjoint column sets."""
    cnt = 0
    for d0 in range(9):
        if not (s0 >> d0) & 1:
            continue
        for d1 in range(9):
            if not (s1 >> d1) & 1:
                continue
            for d2 in range(9):
                if not (s2 >> d2) & 1:
                    continue
                r1 = (1 << d0) | (1 << d1) | (1 << d2)
                rest0 = s0 & ~r1
                rest1 = s1 & ~r1
                rest2 = s2 & ~r1
                for e0 in range(9):
                    if not (rest0 >> e0) & 1:
                        continue
                    for e1 in range(9):
                        if not (rest1 >> e1) & 1:
                            continue
                        for e2 in range(9):
                            if not (rest2 >> e2) & 1:
                                continue
                            r2 = (1 << e0) | (1 << e1) | (1 << e2)
                            out[index[r1 * 512 + r2]] = 1
                            cnt += 1
    return cnt


def _box_orientations(band: np.ndarray, box: int):
    """Valid splits of each column's 6 missing digits into band-2/band-3
    halves for one box: each digit of 1..9 is missing from exactly two of
    the box's columns and goes to one of them for rows 4-6; every column
    must receive exactly 3. Returns a list of (s_sets, t_sets) mask triples."""
    cols = [3 * box, 3 * box + 1, 3 * box + 2]
    col_missing = []
    for c in cols:
        present = 0
        for r in range(3):
            present |= 1 << (int(band[r * 9 + c]) - 1)
        col_missing.append(((1 << 9) - 1) ^ present)
    # digit d sits in exactly one column of the box; it is missing from the
    # other two, recorded here as the pair of local column indices
    options = []
    for d in range(9):
        cs = [k for k in range(3) if (col_missing[k] >> d) & 1]
        assert len(cs) == 2
        options.append(cs)
    out = []
    for choice in range(512):
        s = [0, 0, 0]
        for d in range(9):
            k = options[d][(choice >> d) & 1]
            s[k] |= 1 << d
        if all(bin(x).count("1") == 3 for x in s):
            t = [col_missing[k] ^ s[k] for k in range(3)]
            out.append((tuple(s), tuple(t)))
    assert len(out) == 56
    return out


def _orientation_tables(band: np.ndarray):
    """Per box: bool matrices (56, 1680) of valid band-2 and band-3
    tripartitions for each orientation, plus the orientation list."""
    m1, m2, index, _, _ = partitions()
    vp = np.zeros((3, 56, 1680), np.float32)
    vq = np.zeros((3, 56, 1680), np.float32)
    orient = []
    for b in range(3):
        ors = _box_orientations(band, b)
        orient.append(ors)
        for ci, (s, t) in enumerate(ors):
            _profiles_for_sets(s[0], s[1], s[2], index, vp[b, ci])
            _profiles_for_sets(t[0], t[1], t[2], index, vq[b, ci])
    return vp, vq, orient


def _pair_tensor(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """AS[c2, c0, c1] = number of mutually orthogonal valid tripartition
    triples for orientations (c0, c1, c2) of boxes (0, 1, 2)."""
    _, _, _, pair_i, pair_j = partitions()
    g0 = v0[:, pair_i].transpose(1, 0, 2)          # (1680, 56, 56)
    g1 = v1[:, pair_j].transpose(1, 2, 0)          # (1680, 56, 56)
    m = np.matmul(g0, g1)                          # (1680, 56c0, 56c1)
    return np.matmul(v2, m.reshape(1680, -1)).reshape(56, 56, 56)


def count_completions(band: np.ndarray) -> int:
    """Exact number of ways to complete rows 4-9 under a fixed top band."""
    vp, vq, _ = _orientation_tables(band)
    a_s = _pair_tensor(vp[0], vp[1], vp[2]).astype(np.float64)
    a_t = _pair_tensor(vq[0], vq[1], vq[2]).astype(np.float64)
    return int(round(float(np.sum(a_s * a_t))))


def band2_arrangements_direct(band: np.ndarray, s_sets) -> int:
    """Slow oracle: count row arrangements for one orientation by explicit
    enumeration of transversal tripartitions. Used by tests."""
    m1, m2, index, _, _ = partitions()
    per_box = []
    for b in range(3):
        v = np.zeros(1680, np.float32)
        _profiles_for_sets(s_sets[b][0], s_sets[b][1], s_sets[b][2], index, v)
        per_box.append(np.flatnonzero(v))
    full = (1 << 9) - 1
    count = 0
    for i in per_box[0]:
        a1, b1 = int(m1[i]), int(m2[i])
        for j in per_box[1]:
            a2, b2 = int(m1[j]), int(m2[j])
            if a1 & a2 or b1 & b2:
                continue
            c1 = full ^ a1 ^ b1
            c2 = full ^ a2 ^ b2
            if c1 & c2:
                continue
            k = index[(full ^ a1 ^ a2) * 512 + (full ^ b1 ^ b2)]
            if k >= 0 and k in set(per_box[2]):
                count += 1
    return count


# --------------------------------------------------------------------------
# the offline census tool


def census_n3_offline(checkpoint_path: str, workers: int = 1,
                      max_seconds: Optional[float] = None,
                      log=print) -> Census:
    """Build the full 9×9 census. Hours-scale on one core historically;
    this implementation takes on the order of tens of minutes.

    Progress is checkpointed to ``checkpoint_path`` (a .npz) after the
    classification phase and periodically during counting, so the tool can
    resume after interruption. With ``max_seconds`` set, a partial table is
    returned with ``complete=False`` once the budget runs out.
    """
    t0 = time.time()
    state = _load_checkpoint(checkpoint_path)
    if state is None:
        log("enumerating box-2/box-3 band completions ...")
        bands = enumerate_bands()
        assert len(bands) == BAND_COMPLETIONS, len(bands)
        log(f"  {len(bands)} bands")
        log("canonicalizing under symmetry group (2592 transforms) ...")
        hi, lo = canonical_keys(
            bands, progress=lambda d, t: log(f"  transform {d}/{t}"))
        keys = np.empty(len(hi), dtype=[("hi", np.uint64), ("lo", np.uint64)])
        keys["hi"] = hi
        keys["lo"] = lo
        uniq, sizes = np.unique(keys, return_counts=True)
        log(f"  {len(uniq)} classes")
        state = {
            "rep_hi": uniq["hi"],
            "rep_lo": uniq["lo"],
            "sizes": sizes.astype(np.int64),
            "counts": np.zeros(len(uniq), np.int64),
            "done": np.zeros(len(uniq), np.bool_),
        }
        _save_checkpoint(checkpoint_path, state)
    nclasses = len(state["sizes"])
    pending = np.flatnonzero(~state["done"])
    log(f"counting completions for {len(pending)} of {nclasses} classes ...")
    if len(pending):
        if workers > 1:
            _count_parallel(state, pending, workers, checkpoint_path, max_seconds, t0, log)
        else:
            for idx, ci in enumerate(pending):
                band = _unpack_key(int(state["rep_hi"][ci]), int(state["rep_lo"][ci]))
                state["counts"][ci] = count_completions(band)
                state["done"][ci] = True
                if (idx + 1) % 32 == 0 or idx + 1 == len(pending):
                    _save_checkpoint(checkpoint_path, state)
                    log(f"  {int(state['done'].sum())}/{nclasses} classes")
                if max_seconds is not None and time.time() - t0 > max_seconds:
                    log("budget exhausted; checkpoint saved, table incomplete")
                    break
        _save_checkpoint(checkpoint_path, state)
    return _census_from_state(state)


def _count_parallel(state, pending, workers, checkpoint_path, max_seconds, t0, log):
    import multiprocessing as mp

    args = [(int(state["rep_hi"][ci]), int(state["rep_lo"][ci])) for ci in pending]
    with mp.get_context("spawn").Pool(workers) as pool:
        for (ci, cnt) in zip(pending, pool.imap(_count_worker, args, chunksize=4)):
            state["counts"][ci] = cnt
            state["done"][ci] = True
            ndone = int(state["done"].sum())
            if ndone % 32 == 0:
                _save_checkpoint(checkpoint_path, state)
                log(f"  {ndone}/{len(state['sizes'])} classes")
            if max_seconds is not None and time.time() - t0 > max_seconds:
                log("budget exhausted; checkpoint saved, table incomplete")
                break


def _count_worker(arg):
    hi, lo = arg
    return count_completions(_unpack_key(hi, lo))


def _census_from_state(state) -> Census:
    complete = bool(state["done"].all())
    classes = []
    total = 0
    for ci in range(len(state["sizes"])):
        rep = tuple(int(x) for x in _unpack_key(int(state["rep_hi"][ci]),
                                                int(state["rep_lo"][ci])))
        mult = int(state["sizes"][ci]) * FACT9
        cnt = int(state["counts"][ci])
        classes.append(CensusClass(rep=rep, multiplicity=mult, count=cnt))
        total += mult * cnt
    return Census(n=3, total=total, classes=classes, complete=complete)


def _save_checkpoint(path, state):
    tmp = path + ".tmp.npz"
    with open(tmp, "wb") as f:
        np.savez_compressed(f, **state)
    os.replace(tmp, path)


def _load_checkpoint(path):
    if not os.path.exists(path):
        return None
    try:
        with np.load(path) as z:
            return {k: z[k].copy() for k in
                    ("rep_hi", "rep_lo", "sizes", "counts", "done")}
    except Exception as e:
        raise RuntimeError(f"checkpoint {path} is corrupt: {e}") from e


# --------------------------------------------------------------------------
# census file I/O


def save_census(census: Census, path: str) -> str:
    """Write the binary class table plus a human-readable sidecar with the
    total and the file's sha256. Returns the checksum."""
    if census.n != 3 or census.classes is None:
        raise ValueError("only the n=3 class census is file-backed")
    total_str = str(census.total).encode()
    blob = bytearray()
    blob += MAGIC
    blob += bytes([census.n, 1 if census.complete else 0, 0])
    blob += len(census.classes).to_bytes(4, "little")
    blob += len(total_str).to_bytes(2, "little")
    blob += total_str
    for c in census.classes:
        blob += bytes(c.rep)
        blob += c.multiplicity.to_bytes(8, "little")
        blob += c.count.to_bytes(8, "little")
    with open(path, "wb") as f:
        f.write(blob)
    digest = hashlib.sha256(blob).hexdigest()
    sidecar = {
        "n": census.n,
        "total": str(census.total),
        "classes": len(census.classes),
        "complete": census.complete,
        "sha256": digest,
    }
    with open(path + ".txt", "w") as f:
        json.dump(sidecar, f, indent=1)
        f.write("\n")
    return digest


def load_census(path: str, verify_checksum: bool = True) -> Census:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic, not a census file")
    if verify_checksum and os.path.exists(path + ".txt"):
        with open(path + ".txt") as f:
            sidecar = json.load(f)
        digest = hashlib.sha256(blob).hexdigest()
        if digest != sidecar["sha256"]:
            raise ValueError(f"{path}: sha256 mismatch against sidecar")
    n = blob[8]
    complete = bool(blob[9])
    nclasses = int.from_bytes(blob[11:15], "little")
    tlen = int.from_bytes(blob[15:17], "little")
    off = 17
    total = int(blob[off:off + tlen].decode())
    off += tlen
    classes = []
    for _ in range(nclasses):
        rep = tuple(blob[off:off + 27])
        off += 27
        mult = int.from_bytes(blob[off:off + 8], "little")
        off += 8
        cnt = int.from_bytes(blob[off + 0:off + 8], "little")
        off += 8
        classes.append(CensusClass(rep=rep, multiplicity=mult, count=cnt))
    return Census(n=n, total=total, classes=classes, complete=complete)


def default_census_path() -> str:
    return os.path.join(os.path.dirname(__file__), "data", "census_n3.bin")


_LOADED: dict = {}


def load_default_census() -> Census:
    path = default_census_path()
    if path not in _LOADED:
        _LOADED[path] = load_census(path)
    return _LOADED[path]


# --------------------------------------------------------------------------
# rank / unrank over the class table


def _orbit_members(rep_band: np.ndarray):
    """All distinct bands in a class, as packed keys, ascending."""
    tb = _relabel_canonical(np.stack([rep_band[idx] for idx in transforms()]))
    hi, lo = _pack_keys(tb)
    keys = sorted({(int(a), int(b)) for a, b in zip(hi, lo)})
    return keys


def _perm_from_lehmer(index: int, n: int = 9):
    items = list(range(1, n + 1))
    out = []
    for k in range(n - 1, -1, -1):
        f = _factorial(k)
        d, index = divmod(index, f)
        out.append(items.pop(d))
    return out


def _perm_to_lehmer(perm) -> int:
    items = list(range(1, len(perm) + 1))
    index = 0
    for k, v in enumerate(perm):
        d = items.index(v)
        index = index * (len(perm) - k) + d
        items.pop(d)
    return index


def _factorial(k):
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def _relabel_band(band: np.ndarray, sigma) -> np.ndarray:
    lut = np.zeros(10, np.uint8)
    for d in range(1, 10):
        lut[d] = sigma[d - 1]
    return lut[band]


class _ClassIndexer:
    """Deterministic enumeration of one class's completions.

    Orders orientation triples lexicographically over the per-box
    orientation lists, then tripartition triples for rows 4-6, then rows
    7-9; used by both unrank (decode) and rank (encode).
    """

    def __init__(self, band: np.ndarray):
        self.band = band
        self.vp, self.vq, self.orient = _orientation_tables(band)
        self.a_s = _pair_tensor(self.vp[0], self.vp[1], self.vp[2]).astype(np.int64)
        self.a_t = _pair_tensor(self.vq[0], self.vq[1], self.vq[2]).astype(np.int64)
        # [c2, c0, c1] -> [c0, c1, c2] so the block order is lexicographic
        self.block = (self.a_s * self.a_t).transpose(1, 2, 0)
        self.count = int(self.block.sum())

    def _triples(self, v0, v1, v2):
        """Ordered orthogonal valid tripartition triples for one side."""
        _, _, index, _, _ = partitions()
        m1, m2, _, _, _ = partitions()
        full = (1 << 9) - 1
        i0 = np.flatnonzero(v0)
        i1 = np.flatnonzero(v1)
        out = []
        for i in i0:
            a1, b1 = int(m1[i]), int(m2[i])
            for j in i1:
                a2, b2 = int(m1[j]), int(m2[j])
                if a1 & a2 or b1 & b2:
                    continue
                if (full ^ a1 ^ b1) & (full ^ a2 ^ b2):
                    continue
                k = int(index[(full ^ a1 ^ a2) * 512 + (full ^ b1 ^ b2)])
                if k >= 0 and v2[k]:
                    out.append((int(i), int(j), k))
        return out

    def decode(self, q: int) -> np.ndarray:
        """q-th completion as a full 81-cell grid (band + rows 4-9)."""
        assert 0 <= q < self.count
        flat = self.block.reshape(-1)
        c = 0
        for c in range(flat.shape[0]):
            if q < flat[c]:
                break
            q -= flat[c]
        c0, rem = divmod(c, 56 * 56)
        c1, c2 = divmod(rem, 56)
        at = int(self.a_t[c2, c0, c1])
        u, w = divmod(q, at)
        s_triples = self._triples(self.vp[0][c0], self.vp[1][c1], self.vp[2][c2])
        t_triples = self._triples(self.vq[0][c0], self.vq[1][c1], self.vq[2][c2])
        grid = np.zeros(81, np.uint8)
        grid[:27] = self.band
        orients = (self.orient[0][c0], self.orient[1][c1], self.orient[2][c2])
        self._fill_band(grid, 3, [o[0] for o in orients], s_triples[u])
        self._fill_band(grid, 6, [o[1] for o in orients], t_triples[w])
        return grid

    def encode(self, grid: np.ndarray) -> int:
        """Inverse of decode for a grid whose top band equals self.band."""
        cidx = []
        s_sets = []
        t_sets = []
        for b in range(3):
            s = [0, 0, 0]
            t = [0, 0, 0]
            for k in range(3):
                col = 3 * b + k
                for r in range(3, 6):
                    s[k] |= 1 << (int(grid[r * 9 + col]) - 1)
                for r in range(6, 9):
                    t[k] |= 1 << (int(grid[r * 9 + col]) - 1)
            s_sets.append(tuple(s))
            t_sets.append(tuple(t))
            cidx.append(self.orient[b].index((tuple(s), tuple(t))))
        c0, c1, c2 = cidx
        _, _, index, _, _ = partitions()
        su = self._row_partition_index(grid, 3)
        tw = self._row_partition_index(grid, 6)
        s_triples = self._triples(self.vp[0][c0], self.vp[1][c1], self.vp[2][c2])
        t_triples = self._triples(self.vq[0][c0], self.vq[1][c1], self.vq[2][c2])
        u = s_triples.index(su)
        w = t_triples.index(tw)
        flat = self.block.reshape(-1)
        c = (c0 * 56 + c1) * 56 + c2
        base = int(flat[:c].sum())
        return base + u * int(self.a_t[c2, c0, c1]) + w

    def _row_partition_index(self, grid, row0):
        _, _, index, _, _ = partitions()
        out = []
        for b in range(3):
            masks = []
            for r in (row0, row0 + 1):
                m = 0
                for k in range(3):
                    m |= 1 << (int(grid[r * 9 + 3 * b + k]) - 1)
                masks.append(m)
            out.append(int(index[masks[0] * 512 + masks[1]]))
        return tuple(out)

    def _fill_band(self, grid, row0, col_sets, triple):
        m1, m2, _, _, _ = partitions()
        full = (1 << 9) - 1
        for b in range(3):
            p = triple[b]
            rows = [int(m1[p]), int(m2[p]), full ^ int(m1[p]) ^ int(m2[p])]
            for k in range(3):
                s = col_sets[b][k]
                for ri, rmask in enumerate(rows):
                    d = s & rmask
                    assert d and (d & (d - 1)) == 0
                    grid[(row0 + ri) * 9 + 3 * b + k] = d.bit_length()


def _class_offsets(census: Census):
    offs = []
    acc = 0
    for c in census.classes:
        offs.append(acc)
        acc += c.multiplicity * c.count
    return offs, acc


def unrank3(k: int, census: Census) -> Board:
    """Grid with census-order rank k: class, then member (orbit element and
    box-1 relabeling), then completion."""
    offs, total = _class_offsets(census)
    assert 0 <= k < total
    lo, hi = 0, len(offs) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if offs[mid] <= k:
            lo = mid
        else:
            hi = mid - 1
    ci = lo
    cls = census.classes[ci]
    rem = k - offs[ci]
    member, q = divmod(rem, cls.count)
    o, ell = divmod(member, FACT9)
    rep = np.array(cls.rep, np.uint8)
    orbit = _orbit_members(rep)
    band = _unpack_key(*orbit[o])
    sigma = _perm_from_lehmer(ell)
    band = _relabel_band(band, sigma)
    # completions are counted on the orbit member before relabeling; apply
    # the same relabeling to the completed grid
    idxer = _ClassIndexer(_unpack_key(*orbit[o]))
    grid = idxer.decode(q)
    lut = np.zeros(10, np.uint8)
    for d in range(1, 10):
        lut[d] = sigma[d - 1]
    grid = lut[grid]
    return Board.from_array(3, grid)


def rank3(board: Board, census: Census) -> int:
    grid = np.array(board.cells, np.uint8)
    band = grid[:27].copy()
    # relabeling that restores a canonical box 1
    sigma_inv = np.zeros(10, np.uint8)
    for r in range(3):
        for c in range(3):
            sigma_inv[band[r * 9 + c]] = 3 * r + c + 1
    norm_band = sigma_inv[band]
    key = canonical_key_single(norm_band)
    rep_of = {}
    for i, cls in enumerate(census.classes):
        rep_of[_band_key(np.array(cls.rep, np.uint8))] = i
    ci = rep_of[key]
    cls = census.classes[ci]
    orbit = _orbit_members(np.array(cls.rep, np.uint8))
    o = orbit.index(_band_key(norm_band))
    # member relabeling sigma: band = sigma(orbit band)
    sigma = [int(sigma_inv.tolist().index(d)) for d in range(1, 10)]
    ell = _perm_to_lehmer(sigma)
    norm_grid = sigma_inv[grid]
    idxer = _ClassIndexer(_unpack_key(*orbit[o]))
    q = idxer.encode(norm_grid)
    offs, _ = _class_offsets(census)
    return offs[ci] + (o * FACT9 + ell) * cls.count + q


def _band_key(band: np.ndarray):
    hi, lo = _pack_keys(band.reshape(1, 27))
    return (int(hi[0]), int(lo[0]))
