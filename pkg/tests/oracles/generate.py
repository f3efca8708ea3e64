"""Regenerate the frozen oracle values in ``tests/data/oracles.json``.

Every value here is computed without importing ``steerkit``: explicit index
loops, exact rational/algebraic arithmetic (sympy) and brute-force polytope
enumeration. Run ``python3 tests/oracles/generate.py`` to refresh.
"""

import itertools
import json
from pathlib import Path

import numpy as np
import sympy as sp

OUT = Path(__file__).resolve().parent.parent / "data" / "oracles.json"


def loop_partial_trace(rho, dims, keep):
    """Partial trace by explicit summation over traced indices."""
    n = len(dims)
    kept_dims = [dims[i] for i in keep]
    dk = int(np.prod(kept_dims))
    out = np.zeros((dk, dk), dtype=complex)
    for row in itertools.product(*[range(d) for d in dims]):
        for col in itertools.product(*[range(d) for d in dims]):
            if any(row[i] != col[i] for i in range(n) if i not in keep):
                continue
            r = np.ravel_multi_index(tuple(row[i] for i in keep), kept_dims)
            c = np.ravel_multi_index(tuple(col[i] for i in keep), kept_dims)
            out[r, c] += rho[np.ravel_multi_index(row, dims), np.ravel_multi_index(col, dims)]
    return out


def ns_vertices_brute_force():
    """Vertices of the 2222 no-signaling polytope by active-set enumeration.

    Parametrize p(ab|xy) by 8 free numbers (marginals pA(0|x), pB(0|y) and
    joint p(00|xy)); the 16 probabilities are affine in them. A vertex is a
    feasible point where 8 linearly independent nonnegativity constraints are
    tight.
    """
    # p(ab|xy) = c + M @ theta, theta = (pA0|0, pA0|1, pB0|0, pB0|1, p00|00, p00|01, p00|10, p00|11)
    rows, consts, labels = [], [], []
    for x, y in itertools.product(range(2), repeat=2):
        jx = 4 + 2 * x + y
        for a, b in itertools.product(range(2), repeat=2):
            row = np.zeros(8)
            c = 0.0
            # p00 = J; p01 = pA - J; p10 = pB - J; p11 = 1 - pA - pB + J
            if (a, b) == (0, 0):
                row[jx] = 1
            elif (a, b) == (0, 1):
                row[x] = 1
                row[jx] = -1
            elif (a, b) == (1, 0):
                row[2 + y] = 1
                row[jx] = -1
            else:
                c = 1.0
                row[x] = -1
                row[2 + y] = -1
                row[jx] = 1
            rows.append(row)
            consts.append(c)
            labels.append((a, b, x, y))
    m = np.array(rows)
    c = np.array(consts)
    found = {}
    for active in itertools.combinations(range(16), 8):
        sub = m[list(active)]
        if abs(np.linalg.det(sub)) < 1e-9:
            continue
        theta = np.linalg.solve(sub, -c[list(active)])
        p = c + m @ theta
        if p.min() < -1e-9:
            continue
        key = tuple(np.round(p, 9))
        found[key] = p
    tables = []
    for p in found.values():
        t = np.zeros((2, 2, 2, 2))
        for val, (a, b, x, y) in zip(p, labels):
            t[a, b, x, y] = val
        tables.append(np.round(t, 12).tolist())
    return sorted(tables)


def thm2_exact():
    """Exact check of the explicit two-sided decomposition with sympy."""
    one = sp.eye(2)
    sig = [sp.Matrix([[0, 1], [1, 0]]), sp.Matrix([[0, -sp.I], [sp.I, 0]])]
    q = sp.root(2, 4)
    alpha = (sp.sqrt(2) - 1) / (2 * q)
    beta = 1 / (2 * q) - alpha
    kp = sp.kronecker_product

    def g(a0, a1, b, y):
        loc = a0 * sig[0] + a1 * sig[1]
        return kp(one / 4 + alpha * loc, one / 4) + kp(beta * one + loc / (4 * sp.sqrt(2)), b * sig[y] / 4)

    def h(b0, b1, a, x):
        loc = b0 * sig[0] + b1 * sig[1]
        return kp(one / 4, one / 4 + alpha * loc) + kp(a * sig[x] / 4, beta * one + loc / (4 * sp.sqrt(2)))

    signs = (1, -1)
    worst = 0
    for a, b, x, y in itertools.product(signs, signs, (0, 1), (0, 1)):
        m_ax = (one + a * sig[x] / q) / 2
        m_by = (one + b * sig[y] / q) / 2
        total = sp.zeros(4, 4)
        for free in signs:
            total += g(*((a, free) if x == 0 else (free, a)), b, y)
            total += h(*((b, free) if y == 0 else (free, b)), a, x)
        diff = sp.simplify(kp(m_ax, m_by) - total)
        worst = max(worst, max(abs(complex(sp.N(v, 40))) for v in diff))
    eig_g = sorted(float(sp.N(ev, 30)) for ev in g(1, 1, 1, 0).eigenvals(multiple=True))
    eig_h = sorted(float(sp.N(ev, 30)) for ev in h(1, -1, -1, 1).eigenvals(multiple=True))
    return {
        "alpha": float(sp.N(alpha, 30)),
        "beta": float(sp.N(beta, 30)),
        "reconstruction_error": worst,
        "eigenvalues_G_pp_p_0": eig_g,
        "eigenvalues_H_pm_m_1": eig_h,
        "trace_G": float(sp.N(g(1, -1, 1, 1).trace())),
    }


def busch_threshold(a, b):
    """Critical depolarizing visibility of two unbiased qubit observables with Bloch vectors a, b."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return 2.0 / (np.linalg.norm(a + b) + np.linalg.norm(a - b))


def main():
    ghz = np.zeros(8)
    ghz[0] = ghz[7] = 1 / np.sqrt(2)
    rho_ghz = np.outer(ghz, ghz)
    w = np.zeros(8)
    w[[1, 2, 4]] = 1 / np.sqrt(3)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    pt = np.outer(phi, phi).reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)

    # ghz(3) with sharp Z on party 0: sigma_{a|0} = <a|.|a> block, by loops
    sharp_z = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    ghz_z = [loop_partial_trace(np.kron(e, np.eye(4)) @ rho_ghz, [2, 2, 2], [1, 2]).real.tolist() for e in sharp_z]
    w_coeffs = np.linalg.svd(w.reshape(2, 4), compute_uv=False)

    data = {
        "ghz3_trace_23": loop_partial_trace(rho_ghz, [2, 2, 2], [0]).real.tolist(),
        "pt_phi_plus_min_eig": float(np.linalg.eigvalsh(pt).min()),
        "w3_schmidt": w_coeffs.tolist(),
        "half_i_pm_x_eigs": np.linalg.eigvalsh(0.5 * np.eye(2) + np.array([[0, 1], [1, 0]])).tolist(),
        "ghz3_sharp_z_members": ghz_z,
        "ns_vertices": ns_vertices_brute_force(),
        "thm2": thm2_exact(),
        "jm_threshold_xy": busch_threshold([1, 0, 0], [0, 1, 0]),
        "jm_threshold_xyz": 1 / np.sqrt(3),
    }
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT} ({len(data['ns_vertices'])} no-signaling vertices)")


if __name__ == "__main__":
    main()
