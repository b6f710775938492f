"""Independent reference computations for frozen test fixtures.

Run from the repository root: python3 tests/oracles/derive.py
Writes into tests/fixtures/ and prints the scalar values pinned in the unit tests.
"""
import itertools
import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from sklearn.manifold import trustworthiness
from sklearn.metrics import adjusted_rand_score

FIX = Path("tests/fixtures")
FIX.mkdir(parents=True, exist_ok=True)


def matrix_bytes(rows):
    n, m = len(rows), len(rows[0])
    out = b"TOPOLMX\0" + struct.pack("<IIQQ", 1, 0, n, m)
    for r in rows:
        out += struct.pack("<%df" % m, *r)
    return out + struct.pack("<I", zlib.crc32(out))


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]
        yield [[first]] + p


def modularity(n, edges, parts, gamma=1.0):
    w = sum(e[2] for e in edges)
    deg = [0.0] * n
    for u, v, x in edges:
        deg[u] += x
        deg[v] += x
    q = 0.0
    for c in parts:
        s = set(c)
        w_in = sum(x for u, v, x in edges if u in s and v in s)
        tot = sum(deg[i] for i in c)
        q += w_in / w - gamma * (tot / (2 * w)) ** 2
    return q


def main():
    (FIX / "matrix_1x2.bin").write_bytes(matrix_bytes([[0.5, -0.5]]))

    # two 5-cliques with a bridge: exhaustive optimum over all set partitions of 10 nodes
    edges = [(u, v, 1.0) for u in range(5) for v in range(u + 1, 5)]
    edges += [(u, v, 1.0) for u in range(5, 10) for v in range(u + 1, 10)]
    edges.append((4, 5, 1.0))
    best, best_q, count = None, -1.0, 0
    for p in set_partitions(list(range(10))):
        count += 1
        q = modularity(10, edges, p)
        if q > best_q + 1e-12:
            best, best_q = p, q
    print("bridge partitions searched", count, "optimum", sorted(sorted(c) for c in best), "Q", repr(best_q))

    tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)]
    print("two triangles Q", repr(modularity(6, tri, [[0, 1, 2], [3, 4, 5]])))

    d = np.array([0.5, 0.8, 1.1, 1.7, 2.6])
    rho = d[0]
    f = lambda s: np.exp(-np.maximum(0, d - rho) / s).sum() - math.log2(5)
    print("sigma five neighbors", repr(brentq(f, 1e-6, 100, xtol=1e-14)))

    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 3))
    y = x[:, :2] + 0.3 * rng.normal(size=(20, 2))
    (FIX / "trust_x.txt").write_text("\n".join(" ".join(repr(float(v)) for v in row) for row in x) + "\n")
    (FIX / "trust_y.txt").write_text("\n".join(" ".join(repr(float(v)) for v in row) for row in y) + "\n")
    print("trustworthiness k=3", repr(trustworthiness(x, y, n_neighbors=3)))

    a = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2]
    b = [1, 1, 0, 0, 2, 2, 2, 2, 0, 0]
    print("ari fixture", repr(adjusted_rand_score(a, b)))

    v = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 1.0, 1.0]])
    mags = np.linalg.norm(v, axis=1)
    cos = [v[i] @ v[j] / (mags[i] * mags[j]) for i, j in itertools.combinations(range(3), 2)]
    print("three-vector mags", [repr(m) for m in mags], "mean", repr(mags.mean()))
    print("three-vector cos", [repr(c) for c in cos], "mean", repr(float(np.mean(cos))))

    from scipy.optimize import curve_fit
    for md in (0.1, 0.5):
        xs = np.linspace(0, 3, 300)
        ys = np.where(xs < md, 1.0, np.exp(-(xs - md)))
        ab = curve_fit(lambda x, a, b: 1 / (1 + a * x ** (2 * b)), xs, ys)[0]
        print("curve min_dist", md, "a b", repr(ab[0]), repr(ab[1]))


if __name__ == "__main__":
    main()
