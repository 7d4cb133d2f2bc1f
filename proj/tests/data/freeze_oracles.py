"""Write ../frozen_oracles.hpp: reference values computed with numpy/scipy/sklearn.

Run once; the C++ tests compare against the frozen numbers.
"""
import numpy as np
from scipy.stats import spearmanr
from sklearn.metrics import (adjusted_rand_score, calinski_harabasz_score,
                             davies_bouldin_score, silhouette_score)

rng = np.random.default_rng(20240611)
out = []


def arr(name, values, ctype="double"):
    flat = np.asarray(values).ravel()
    body = ", ".join(repr(float(v)) if ctype == "double" else str(int(v)) for v in flat)
    out.append(f"inline const std::vector<{ctype}> {name}{{{body}}};")


def val(name, v):
    out.append(f"inline constexpr double {name} = {float(v)!r};")


# validity indices on a labelled 30 x 3 point set (k = 4)
pts = np.round(rng.normal(size=(30, 3)) + np.repeat(np.eye(4, 3) * 4, [8, 8, 7, 7], axis=0), 6)
lab = np.array([0] * 8 + [1] * 8 + [2] * 7 + [3] * 7)
lab[[2, 11, 20]] = [1, 2, 3]
cent = np.array([pts[lab == c].mean(0) for c in range(4)])
wss = sum(((pts[lab == c] - cent[c]) ** 2).sum() for c in range(4))
d = np.linalg.norm(pts[:, None, :] - cent[None, :, :], axis=2)
a = d[np.arange(30), lab]
b = np.where(np.eye(4, dtype=bool)[lab], np.inf, d).min(1)
arr("points30", pts)
arr("labels30", lab, "std::uint32_t")
val("points30_wss", wss)
val("points30_silhouette_centroid", np.mean((b - a) / np.maximum(a, b)))
val("points30_silhouette_pairwise", silhouette_score(pts, lab))
val("points30_davies_bouldin", davies_bouldin_score(pts, lab))
val("points30_calinski_harabasz", calinski_harabasz_score(pts, lab))

# spearman with ties
x = np.round(rng.uniform(-1, 1, 12), 1)
y = np.round(x + rng.normal(scale=0.4, size=12), 1)
arr("spearman_x", x)
arr("spearman_y", y)
val("spearman_rho", spearmanr(x, y).correlation)

# symmetrized KL between 50-bin histograms on [-1, 1], eps 1e-10
p_vals = np.clip(rng.normal(0.3, 0.2, 40), -1, 1)
q_vals = np.clip(rng.normal(0.1, 0.3, 40), -1, 1)


def hist(v, bins=50, eps=1e-10):
    idx = np.minimum(((v + 1) / 2 * bins).astype(int), bins - 1)
    c = np.bincount(idx, minlength=bins) / len(v)
    return (c + eps) / (1 + bins * eps)


P, Q = hist(p_vals), hist(q_vals)
arr("kl_p", p_vals)
arr("kl_q", q_vals)
val("kl_symmetric", 0.5 * np.sum(P * np.log(P / Q)) + 0.5 * np.sum(Q * np.log(Q / P)))

# cohesion of a 20 x 4 cluster, separation of 6 centroids
cl = np.round(rng.normal(size=(20, 4)) + [2, 0, 1, 0], 6)
c = cl.mean(0)
un = cl / np.linalg.norm(cl, axis=1, keepdims=True)
arr("cohesion_points", cl)
val("cohesion_t", np.mean(np.linalg.norm(un - c / np.linalg.norm(c), axis=1)))
cs = np.round(rng.normal(size=(6, 4)), 6)
arr("separation_centroids", cs)
cn = cs / np.linalg.norm(cs, axis=1, keepdims=True)
dd = np.linalg.norm(cn[:, None] - cn[None], axis=2)
arr("separation_values", dd.sum(1) / 5)

# summary statistics
sv = np.round(rng.uniform(0, 1, 20), 6)
arr("summary_values", sv)
val("summary_mean", sv.mean())
val("summary_std", sv.std())

# adjusted Rand index
la = rng.integers(0, 3, 40)
lb = np.where(rng.uniform(size=40) < 0.7, la, rng.integers(0, 4, 40))
arr("ari_a", la, "std::int64_t")
arr("ari_b", lb, "std::int64_t")
val("ari_value", adjusted_rand_score(la, lb))

header = ["#ifndef KGSUB_TESTS_FROZEN_ORACLES_HPP", "#define KGSUB_TESTS_FROZEN_ORACLES_HPP", "",
          "// Generated by data/freeze_oracles.py (numpy/scipy/scikit-learn). Do not edit.", "",
          "#include <cstdint>", "#include <vector>", "", "namespace frozen {", ""]
with open("../frozen_oracles.hpp", "w") as f:
    f.write("\n".join(header + out + ["", "}", "", "#endif", ""]))
