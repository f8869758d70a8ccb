#!/usr/bin/env python3
"""Freeze reference objectives for random cone programs into tests/data.

The reference values come from an exact-penalty projected-subgradient method
with Polyak target-level steps: an independent first-order code path sharing
nothing with the interior-point solver under test. Instances are generated
from a fixed seed with a strictly feasible primal point and a bounding ball,
so every instance has a finite optimum and a Slater point.
"""

import argparse
import json
import os

import numpy as np


def make_instance(rng, n, n_orth, soc_dims):
    """Random bounded instance with a strictly interior primal point."""
    m = n_orth + sum(soc_dims)
    p = rng.integers(1, max(2, n // 3) + 1)
    a_mat = rng.standard_normal((p, n))
    g_mat = rng.standard_normal((m, n))
    x0 = rng.standard_normal(n)
    b = a_mat @ x0
    s0 = np.empty(m)
    s0[:n_orth] = rng.uniform(0.5, 2.0, n_orth)
    ofs = n_orth
    for d in soc_dims:
        tail = rng.standard_normal(d - 1)
        s0[ofs] = np.linalg.norm(tail) + rng.uniform(0.5, 2.0)
        s0[ofs + 1:ofs + d] = tail
        ofs += d
    h = g_mat @ x0 + s0
    # Bounding ball ||x|| <= R as one more SOC block keeps the optimum finite.
    radius = float(np.linalg.norm(x0) + 5.0)
    g_ball = np.vstack([np.zeros((1, n)), np.eye(n)])
    h_ball = np.concatenate([[radius], np.zeros(n)])
    g_full = np.vstack([g_mat, g_ball])
    h_full = np.concatenate([h, h_ball])
    c = rng.standard_normal(n)
    c /= np.linalg.norm(c)
    return {
        "c": c, "A": a_mat, "b": b, "G": g_full, "h": h_full,
        "nonneg": int(n_orth), "soc_dims": [int(d) for d in soc_dims] + [n + 1],
        "x0": x0,
    }


def violation_and_subgrad(inst, x):
    """Cone-constraint violation (1-norm of the gaps) and one subgradient."""
    g_mat, h = inst["G"], inst["h"]
    n_orth = inst["nonneg"]
    viol = 0.0
    grad = np.zeros(x.size)
    s = h - g_mat @ x
    hinge = np.minimum(s[:n_orth], 0.0)
    viol += -float(hinge.sum())
    grad += g_mat[:n_orth].T @ (hinge < 0).astype(float)
    ofs = n_orth
    for d in inst["soc_dims"]:
        blk = s[ofs:ofs + d]
        tail_norm = np.linalg.norm(blk[1:])
        gap = tail_norm - blk[0]
        if gap > 0:
            viol += gap
            gsub = np.zeros(d)
            gsub[0] = -1.0
            if tail_norm > 0:
                gsub[1:] = blk[1:] / tail_norm
            grad += -g_mat[ofs:ofs + d].T @ gsub
        ofs += d
    return viol, grad


def oracle_solve(inst, penalty=10.0, iters=250000):
    """Projected subgradient on the exact penalty with target-level steps.

    Iterates stay on the affine subspace Ax = b through an explicit
    projector; the cone constraints enter the objective as an exact 1-norm
    penalty. The Polyak level best - delta tightens geometrically whenever a
    phase stalls, which gives high-accuracy limits on these small sharp
    instances."""
    c = inst["c"]
    a_mat, b = inst["A"], inst["b"]
    aat_inv = np.linalg.inv(a_mat @ a_mat.T)
    null_proj = np.eye(c.size) - a_mat.T @ aat_inv @ a_mat
    x_eq = a_mat.T @ (aat_inv @ b)

    x = null_proj @ inst["x0"] + x_eq
    best = np.inf
    best_x = x.copy()
    delta = 1.0
    since_improve = 0
    for _ in range(iters):
        viol, vgrad = violation_and_subgrad(inst, x)
        f = float(c @ x) + penalty * viol
        if f < best:
            # Only a significant improvement relative to the current level
            # gap resets the phase; hairline improvements must not keep the
            # target level from tightening.
            if best - f > 0.05 * delta:
                since_improve = 0
            best, best_x = f, x.copy()
        since_improve += 1
        if since_improve > 2500:
            delta = max(delta * 0.5, 1e-11)
            since_improve = 0
            x = best_x.copy()
            if delta <= 1e-10:
                break
            continue
        g = null_proj @ (c + penalty * vgrad)
        gn = float(g @ g)
        if gn <= 1e-30:
            break
        step = (f - (best - delta)) / gn
        x = x - step * g
    viol, _ = violation_and_subgrad(inst, best_x)
    return float(c @ best_x), float(viol), best_x


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20240901)
    parser.add_argument("--iters", type=int, default=300000)
    default_out = os.path.join(os.path.dirname(__file__), "..", "tests",
                               "data", "socp_oracle.json")
    parser.add_argument("--out", default=os.path.normpath(default_out))
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    records = []
    for i in range(args.count):
        n = int(rng.integers(5, 13))
        n_orth = int(rng.integers(1, 6))
        soc_dims = [int(rng.integers(2, 5))
                    for _ in range(int(rng.integers(1, 3)))]
        inst = make_instance(rng, n, n_orth, soc_dims)
        # Every feasible iterate upper-bounds the optimum, and the sticking
        # points of the penalty surface move with the penalty weight, so the
        # best feasible objective over several weights is the tightest bound.
        obj, viol = np.inf, np.inf
        for penalty in (10.0, 50.0, 200.0):
            obj_p, viol_p, _ = oracle_solve(inst, penalty=penalty,
                                            iters=args.iters)
            if viol_p <= 1e-9 and obj_p < obj:
                obj, viol = obj_p, viol_p
        records.append({"objective": obj, "residual_violation": viol})
        print(f"instance {i:3d}: n={n} oracle objective {obj:+.8f} "
              f"violation {viol:.2e}", flush=True)
    doc = {
        "seed": args.seed,
        "count": args.count,
        "generator": "make_instance",
        "instances": records,
    }
    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
