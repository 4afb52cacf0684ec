"""Compiled batch kernel for Sturm-chain root counting on [-1, 1].

Mirrors the list-based kernel in ``polycore`` exactly: unit max-abs
normalization of every chain element, relative strip/stop tolerances, and
sign variations that skip near-zero evaluations.  Falls back to None when
numba is unavailable; callers then use the pure-Python path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except Exception:  # pragma: no cover - numba is optional
    njit = None

_STRIP_REL = 1e-12
_CHAIN_STOP_REL = 1e-10
_SIGN_ZERO_REL = 1e-11


def _build(jit):
    @jit(cache=True, nogil=True)
    def batch_count(C):
        m, w = C.shape
        out = np.empty(m, dtype=np.int64)
        chain = np.empty((w + 2, w), dtype=np.float64)
        lens = np.empty(w + 2, dtype=np.int64)
        rem = np.empty(w, dtype=np.float64)
        for row in range(m):
            # strip and normalize p0
            cmax = 0.0
            for j in range(w):
                a = abs(C[row, j])
                if a > cmax:
                    cmax = a
            k = w - 1
            while k > 0 and abs(C[row, k]) <= _STRIP_REL * cmax:
                k -= 1
            if k == 0:
                out[row] = 0
                continue
            for j in range(k + 1):
                chain[0, j] = C[row, j] / cmax
            lens[0] = k + 1
            # derivative, normalized
            dmax = 0.0
            for j in range(1, k + 1):
                chain[1, j - 1] = chain[0, j] * j
                a = abs(chain[1, j - 1])
                if a > dmax:
                    dmax = a
            dk = k - 1
            while dk > 0 and abs(chain[1, dk]) <= _STRIP_REL * dmax:
                dk -= 1
            for j in range(dk + 1):
                chain[1, j] /= dmax
            lens[1] = dk + 1
            nchain = 2
            # remainder chain
            while lens[nchain - 1] - 1 > 0:
                la = lens[nchain - 2]
                lb = lens[nchain - 1]
                for j in range(la):
                    rem[j] = chain[nchain - 2, j]
                rlen = la
                db = lb - 1
                lead = chain[nchain - 1, db]
                while rlen - 1 >= db:
                    q = rem[rlen - 1] / lead
                    off = rlen - 1 - db
                    for j in range(db):
                        rem[off + j] -= q * chain[nchain - 1, j]
                    rlen -= 1
                    rmax = 0.0
                    for j in range(rlen):
                        a = abs(rem[j])
                        if a > rmax:
                            rmax = a
                    floor = rmax if rmax > 1e-300 else 1e-300
                    while rlen > 1 and abs(rem[rlen - 1]) <= _STRIP_REL * floor:
                        rlen -= 1
                    if rlen == 1:
                        break
                rmax = 0.0
                for j in range(rlen):
                    a = abs(rem[j])
                    if a > rmax:
                        rmax = a
                if rmax < _CHAIN_STOP_REL:
                    break
                for j in range(rlen):
                    chain[nchain, j] = -rem[j] / rmax
                lens[nchain] = rlen
                nchain += 1
            # sign variations at -1 and +1, skipping near-zero values
            count = 0
            for endpoint in range(2):
                x = -1.0 if endpoint == 0 else 1.0
                prev = 0.0
                vars_ = 0
                for ci in range(nchain):
                    val = 0.0
                    mag = 0.0
                    for j in range(lens[ci] - 1, -1, -1):
                        val = val * x + chain[ci, j]
                        mag = mag + abs(chain[ci, j])  # |x| = 1
                    if abs(val) > _SIGN_ZERO_REL * (mag if mag > 1e-300 else 1e-300):
                        s = 1.0 if val > 0 else -1.0
                        if prev != 0.0 and s * prev < 0:
                            vars_ += 1
                        prev = s
                if endpoint == 0:
                    count = vars_
                else:
                    count -= vars_
            deg0 = lens[0] - 1
            if count < 0:
                count = 0
            if count > deg0:
                count = deg0
            out[row] = count
        return out

    return batch_count


batch_count = _build(njit) if njit is not None else None
