"""Generate minimal-basis molecular-hydrogen fixtures for the data directory.

Computes STO-3G integrals for H2 at a given bond length from closed-form
s-Gaussian formulas, forms the symmetry-adapted molecular orbitals (no SCF
iterations are needed in a minimal basis), and writes

  * a fermionic Hamiltonian file (`h2_<R>.ham`) in spin-orbital form, and
  * a low-rank factor file (`h2_<R>_lowrank.json`) splitting the two-body
    part into squared quadratic forms via an eigendecomposition of the
    electron-repulsion supermatrix.

Spin-orbital ordering: mode 2p + s for spatial orbital p in (bonding = 0,
antibonding = 1) and spin s in (up = 0, down = 1).

Run:  python3 tools/generate_h2_fixture.py [--bond-length 0.7414] [--outdir src/vpelab/data]
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
from pathlib import Path

import numpy as np
from scipy.special import erf

ANGSTROM_TO_BOHR = 1.8897259886

# STO-3G hydrogen 1s: exponents (already scaled by zeta=1.24) and contraction
# coefficients for unit-normalized primitives.
EXPONENTS = np.array([3.42525091, 0.62391373, 0.16885540])
COEFFS = np.array([0.15432897, 0.53532814, 0.44463454])


def _norm(alpha: float) -> float:
    return (2.0 * alpha / math.pi) ** 0.75


def _boys0(x: float) -> float:
    if x < 1e-12:
        return 1.0 - x / 3.0
    return 0.5 * math.sqrt(math.pi / x) * erf(math.sqrt(x))


def _primitive_pairs(ra, rb):
    """Yield (alpha, beta, prefactor, gaussian product center) per pair."""
    ab2 = float(np.dot(ra - rb, ra - rb))
    for a, da in zip(EXPONENTS, COEFFS):
        for b, db in zip(EXPONENTS, COEFFS):
            p = a + b
            pref = da * db * _norm(a) * _norm(b) * math.exp(-a * b / p * ab2)
            center = (a * ra + b * rb) / p
            yield a, b, pref, center


def overlap(ra, rb) -> float:
    return sum(pref * (math.pi / (a + b)) ** 1.5
               for a, b, pref, _ in _primitive_pairs(ra, rb))


def kinetic(ra, rb) -> float:
    ab2 = float(np.dot(ra - rb, ra - rb))
    total = 0.0
    for a, b, pref, _ in _primitive_pairs(ra, rb):
        p = a + b
        mu = a * b / p
        total += pref * mu * (3.0 - 2.0 * mu * ab2) * (math.pi / p) ** 1.5
    return total


def nuclear(ra, rb, centers_charges) -> float:
    total = 0.0
    for a, b, pref, rp in _primitive_pairs(ra, rb):
        p = a + b
        for rc, charge in centers_charges:
            x = p * float(np.dot(rp - rc, rp - rc))
            total -= charge * pref * (2.0 * math.pi / p) * _boys0(x)
    return total


def repulsion(ra, rb, rc, rd) -> float:
    total = 0.0
    for a, b, pref_ab, rp in _primitive_pairs(ra, rb):
        p = a + b
        for c, d, pref_cd, rq in _primitive_pairs(rc, rd):
            q = c + d
            x = p * q / (p + q) * float(np.dot(rp - rq, rp - rq))
            total += (pref_ab * pref_cd * 2.0 * math.pi ** 2.5
                      / (p * q * math.sqrt(p + q)) * _boys0(x))
    return total


def h2_mo_integrals(bond_angstrom: float):
    """Return (h_mo, eri_mo chemist (pq|rs), nuclear repulsion)."""
    r = bond_angstrom * ANGSTROM_TO_BOHR
    centers = [np.zeros(3), np.array([0.0, 0.0, r])]
    charges = [(centers[0], 1.0), (centers[1], 1.0)]
    s01 = overlap(centers[0], centers[1])
    hcore = np.empty((2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        hcore[i, j] = (kinetic(centers[i], centers[j])
                       + nuclear(centers[i], centers[j], charges))
    # Symmetry-adapted MOs: bonding/antibonding combinations.
    cg = 1.0 / math.sqrt(2.0 * (1.0 + s01))
    cu = 1.0 / math.sqrt(2.0 * (1.0 - s01))
    coeff = np.array([[cg, cu], [cg, -cu]])  # columns: g, u
    h_mo = coeff.T @ hcore @ coeff
    eri_ao = np.empty((2, 2, 2, 2))
    for i, j, k, l in itertools.product(range(2), repeat=4):
        eri_ao[i, j, k, l] = repulsion(centers[i], centers[j],
                                       centers[k], centers[l])
    eri_mo = np.einsum("ip,jq,kr,ls,ijkl->pqrs",
                       coeff, coeff, coeff, coeff, eri_ao)
    e_nuc = 1.0 / r
    return h_mo, eri_mo, e_nuc


def spin_orbital_terms(h_mo, eri_mo):
    """Second-quantized terms over 4 spin orbitals (mode = 2p + spin)."""
    one_body = {}
    for p, q in itertools.product(range(2), repeat=2):
        if abs(h_mo[p, q]) > 1e-12:
            for s in range(2):
                one_body[(2 * p + s, 2 * q + s)] = h_mo[p, q]
    two_body = {}
    # 1/2 sum_{pqrs, st} (pq|rs) a+_{ps} a+_{rt} a_{st} a_{qs'}  (chemist)
    for p, q, r, s in itertools.product(range(2), repeat=4):
        coeff = 0.5 * eri_mo[p, q, r, s]
        if abs(coeff) < 1e-12:
            continue
        for sig, tau in itertools.product(range(2), repeat=2):
            key = (2 * p + sig, 2 * r + tau, 2 * s + tau, 2 * q + sig)
            two_body[key] = two_body.get(key, 0.0) + coeff
    return one_body, two_body


def write_hamiltonian(path: Path, one_body, two_body, e_nuc,
                      bond_angstrom: float) -> None:
    lines = [f"# H2 / STO-3G at {bond_angstrom} angstrom, spin orbitals"
             " (mode = 2*spatial + spin; 0 = bonding, 1 = antibonding)",
             f"{e_nuc:.12f}  # nuclear repulsion"]
    for (i, j), coeff in sorted(one_body.items()):
        lines.append(f"+{i} -{j} {coeff:.12f}")
    for (a, b, c, d), coeff in sorted(two_body.items()):
        if abs(coeff) > 1e-12:
            lines.append(f"+{a} +{b} -{c} -{d} {coeff:.12f}")
    path.write_text("\n".join(lines) + "\n")


def low_rank_document(h_mo, eri_mo, e_nuc):
    """Low-rank split: H = const + quadratic + 1/2 sum_l (L_l)^2."""
    # Reordering the two-body product into quadratic-times-quadratic form
    # leaves a one-body correction -1/2 sum_q (pq|qs).
    correction = -0.5 * np.einsum("pqqs->ps", eri_mo)
    one_body_spatial = h_mo + correction
    one_body = np.zeros((4, 4))
    for p, q in itertools.product(range(2), repeat=2):
        for s in range(2):
            one_body[2 * p + s, 2 * q + s] = one_body_spatial[p, q]
    super_m = eri_mo.reshape(4, 4)  # rows (pq), cols (rs); symmetric PSD
    vals, vecs = np.linalg.eigh(super_m)
    factors = []
    for lam, vec in zip(vals, vecs.T):
        if lam < 1e-12:
            continue
        u = vec.reshape(2, 2)
        u = 0.5 * (u + u.T)
        g_spatial = math.sqrt(lam / 2.0) * u
        g = np.zeros((4, 4))
        for p, q in itertools.product(range(2), repeat=2):
            for s in range(2):
                g[2 * p + s, 2 * q + s] = g_spatial[p, q]
        eigs, q_mat = np.linalg.eigh(g)
        factors.append({"basis": q_mat.T.tolist(), "eigs": eigs.tolist()})
    return {"constant": e_nuc, "one_body": one_body.tolist(),
            "factors": factors}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--bond-length", type=float, default=0.7414)
    parser.add_argument("--outdir", type=Path,
                        default=Path(__file__).resolve().parent.parent
                        / "src" / "vpelab" / "data")
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    h_mo, eri_mo, e_nuc = h2_mo_integrals(args.bond_length)
    one_body, two_body = spin_orbital_terms(h_mo, eri_mo)
    tag = f"{args.bond_length:g}"
    ham_path = args.outdir / f"h2_{tag}.ham"
    write_hamiltonian(ham_path, one_body, two_body, e_nuc, args.bond_length)
    doc = low_rank_document(h_mo, eri_mo, e_nuc)
    json_path = args.outdir / f"h2_{tag}_lowrank.json"
    json_path.write_text(json.dumps(doc, indent=1))
    print(f"wrote {ham_path} and {json_path}")

    # Self-check: exact diagonalization of the emitted operator.
    from vpelab import hamiltonians as hm
    op = hm.load_hamiltonian_file(ham_path)
    energies = np.linalg.eigvalsh(hm.jordan_wigner(op).matrix())
    print(f"FCI ground energy: {energies[0]:.6f} Ha")
    lr = hm.load_low_rank_file(json_path)
    decomp = hm.low_rank_decomposition(*lr[:2], constant=lr[2])
    diff = np.abs(decomp.total_matrix()
                  - hm.jordan_wigner(op).matrix()).max()
    print(f"low-rank reconstruction max deviation: {diff:.2e}")


if __name__ == "__main__":
    main()
