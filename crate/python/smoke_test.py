"""Quick check that the extension imports and its main entry points agree
with known values. Build first with

    pip install --no-build-isolation ./crates/python
"""

import math

import specpts


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    # regular tetrahedron: all squared chordal distances 8/3
    s = 1 / math.sqrt(3)
    tet = specpts.PointConfig.sphere([[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]])
    for d in tet.pair_distances_sq():
        close(d, 8 / 3, 1e-12)
    w = math.exp(-2 * 8 / 3)
    close(specpts.evaluate(tet, "exp:2", "trace"), 12 * w, 1e-12)
    close(specpts.evaluate(tet, "exp:2", "lambdamax"), 4 * w, 1e-12)

    cfg = specpts.PointConfig.random_sphere(6, 3, 7)
    assert specpts.fd_check(cfg, "exp:2", "rtot") < 1e-5
    value, grad = specpts.value_and_gradient(cfg, "exp:2", "trace")
    assert len(grad) == 6 and len(grad[0]) == 3
    assert specpts.PointConfig.from_json(cfg.to_json()).points == cfg.points

    run = specpts.multi_start(4, "exp:2", "trace", restarts=4, seed=1, sphere_dim=3)
    for d in run.config.pair_distances_sq():
        close(d, 8 / 3, 1e-5)

    close(specpts.operator_norm(0.0, 1.0, "exp:2"), 0.61631, 1e-4)
    close(specpts.operator_norm(0.5, math.sqrt(3) / 2, "exp:2"), 0.60239, 1e-4)
    centers, mass = specpts.dos(0.5, math.sqrt(3) / 2, "exp:2", samples=64, bins=50)
    close(sum(mass), (2 * math.pi) ** 2, 1e-9)

    g = specpts.torus_graph(0.5, math.sqrt(3) / 2, 6)
    spec = specpts.laplacian_spectrum(g, "exp:2")
    assert len(spec) == 36 and abs(spec[0]) < 1e-12

    field = specpts.sweep("trace", "exp:2", side=6, na=5, nb=5)
    a, b, _ = min(field, key=lambda r: r[2])
    close(a, 0.5, 1e-12)
    close(b, math.sqrt(3) / 2, 1e-12)
    print("specpts", specpts.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
