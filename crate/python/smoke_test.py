"""Smoke test for the cuspforge Python module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import math

import cuspforge as cf


def main():
    cut = cf.make_cutoff(0.1)
    print(cut)
    assert cut(0.5) == 1.0 and cut(cut.r_eps + 1) == 0.0

    hyp = cf.Profile.hyperbolic(12.0)
    k = hyp.curvatures(2.0, 3)
    assert abs(k["k_t_phi"] + 1) < 1e-9 and k["k_u_v"] is None

    tube = cf.Profile.tube(cut)
    cert = tube.certify_pinching(4, 0.0, cut.r_eps + 2, -1.1, 0.0)
    assert cert["verdict"] == "pass", cert

    lat = cf.Lattice([[1.0, 0.0, 0.0], [0.3, 1.1, 0.0], [0.2, -0.4, 1.3]])
    assert abs(lat.covolume() - 1.43) < 1e-12
    coeffs, vec, norm = lat.shortest_vector()
    assert abs(norm - 1.0) < 1e-12, (coeffs, vec)

    a = cf.assemble(100.0, [lat], 0.1, 4, cut_budget=0.01, volume_bound=110.0)
    assert a.verdict and a.witness_rank == 2
    report = a.report()
    tube_region = next(r for r in report["regions"] if r["region"] == "tube")
    assert abs(2 * math.pi * tube.values(tube_region["t0"]["t0"])["s"] - tube_region["gamma1_length"]) < 1e-9 * tube_region["gamma1_length"]

    ent = a.entropy(samples=20000, seed=42)
    assert ent["bound_after"] >= ent["n"] - 1 - ent["eps_bar"] - 1e-9
    print(a.entropy_chain(samples=20000, seed=42))

    h = cf.model_volume_entropy(4, 30.0)
    assert abs(h - 3) < 0.1
    assert cf.eps_bar(4, 0.01) < 0.06
    print("smoke test ok: h_v(H^4) ~", h, "| assembled volume", a.total_volume)


if __name__ == "__main__":
    main()
