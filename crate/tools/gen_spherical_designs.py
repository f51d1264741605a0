#!/usr/bin/env python3
"""Generate antipodally symmetric spherical t-designs on S^2.

A spherical t-design is a point set {x_1..x_M} on the unit sphere whose
equal-weight average integrates every polynomial of total degree <= t
exactly.  The sets produced here are antipodally symmetric (x in the set
implies -x in the set), which makes every odd-degree moment vanish
identically; the generator therefore only has to drive the even-degree
monomial moments to their exact values.

Sizes produced (matching the solver's shipped tables):
  M = 12  -> strength t = 5  (regular icosahedron, analytic)
  M = 32  -> strength t = 7  (optimized, 16 free antipodal pairs)
  M = 48  -> strength t = 9  (optimized, 24 free antipodal pairs)

Output format: one unit vector per line, three whitespace-separated
floating point components, no header.  Files are written next to this
script into ../crates/granular/src/data/.

The optimization is a plain least-squares minimization of the moment
residuals with random restarts; it reliably converges to residuals at
machine precision for these sizes.  Deterministic given the fixed seed.
"""

import os
import sys

import numpy as np
from scipy.optimize import least_squares

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "crates", "granular", "src", "data")


def double_factorial(n: int) -> int:
    if n <= 0:
        return 1
    r = 1
    while n > 1:
        r *= n
        n -= 2
    return r


def exact_monomial_moment(a: int, b: int, c: int) -> float:
    """Mean over S^2 of x^a y^b z^c (surface measure normalized to 1)."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    num = double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1)
    den = double_factorial(a + b + c + 1)
    return num / den


def even_monomials(t: int):
    """All (a,b,c) with even total degree 2..t (or t-1 if t odd)."""
    out = []
    top = t if t % 2 == 0 else t - 1
    for deg in range(2, top + 1, 2):
        for a in range(deg + 1):
            for b in range(deg - a + 1):
                out.append((a, b, deg - a - b))
    return out


def residuals(angles: np.ndarray, monos) -> np.ndarray:
    """Moment residuals for the antipodal closure of the free points."""
    n = angles.size // 2
    theta = angles[:n]
    phi = angles[n:]
    st, ct = np.sin(theta), np.cos(theta)
    x = st * np.cos(phi)
    y = st * np.sin(phi)
    z = ct
    res = np.empty(len(monos))
    for i, (a, b, c) in enumerate(monos):
        # antipodal pair contributes x^.. twice for even total degree
        res[i] = np.mean(x**a * y**b * z**c) - exact_monomial_moment(a, b, c)
    return res


def solve_design(m_total: int, strength: int, rng: np.random.Generator):
    n_free = m_total // 2
    monos = even_monomials(strength)
    best = None
    for attempt in range(200):
        theta = np.arccos(rng.uniform(-1.0, 1.0, n_free))
        phi = rng.uniform(0.0, 2.0 * np.pi, n_free)
        sol = least_squares(
            residuals,
            np.concatenate([theta, phi]),
            args=(monos,),
            method="trf",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=20000,
        )
        err = np.max(np.abs(residuals(sol.x, monos)))
        if best is None or err < best[0]:
            best = (err, sol.x)
        if err < 1e-14:
            break
    err, angles = best
    print(f"M={m_total} t={strength}: max moment residual {err:.3e} after {attempt + 1} attempt(s)")
    if err > 1e-13:
        sys.exit(f"failed to converge for M={m_total}")
    n = angles.size // 2
    theta, phi = angles[:n], angles[n:]
    st, ct = np.sin(theta), np.cos(theta)
    pts = np.column_stack([st * np.cos(phi), st * np.sin(phi), ct])
    # exact antipodal closure; renormalize to counter rounding in the trig
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    return np.vstack([pts, -pts])


def icosahedron() -> np.ndarray:
    """The 12 vertices of a regular icosahedron: a spherical 5-design."""
    gold = (1.0 + np.sqrt(5.0)) / 2.0
    base = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            base.append((0.0, s1, s2 * gold))
            base.append((s1, s2 * gold, 0.0))
            base.append((s2 * gold, 0.0, s1))
    pts = np.array(base) / np.sqrt(1.0 + gold * gold)
    return pts


def verify(pts: np.ndarray, strength: int) -> float:
    worst = 0.0
    for a, b, c in even_monomials(strength + 1):  # +1 also probes one degree past
        got = np.mean(pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
        want = exact_monomial_moment(a, b, c)
        deg = a + b + c
        err = abs(got - want)
        if deg <= strength:
            worst = max(worst, err)
    # odd degrees are exact by antipodal symmetry; spot-check one
    assert abs(np.mean(pts[:, 0] * pts[:, 1] * pts[:, 2])) < 1e-15
    return worst


def write_design(path: str, pts: np.ndarray):
    with open(path, "w") as f:
        for p in pts:
            f.write(f"{p[0]:.17e} {p[1]:.17e} {p[2]:.17e}\n")


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    rng = np.random.default_rng(20240817)

    ico = icosahedron()
    print(f"M=12 t=5 (icosahedron): max moment residual {verify(ico, 5):.3e}")
    write_design(os.path.join(OUT_DIR, "sphere_design_012.txt"), ico)

    d32 = solve_design(32, 7, rng)
    print(f"  verified t=7: {verify(d32, 7):.3e}")
    write_design(os.path.join(OUT_DIR, "sphere_design_032.txt"), d32)

    d48 = solve_design(48, 9, rng)
    print(f"  verified t=9: {verify(d48, 9):.3e}")
    write_design(os.path.join(OUT_DIR, "sphere_design_048.txt"), d48)


if __name__ == "__main__":
    main()
