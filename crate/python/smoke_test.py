"""Smoke test for the `breather` extension module.

Build and install with `maturin develop --release -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math

import breather


def main():
    prof = breather.ground_state(1)
    assert abs(prof.mass() - 1.0) < 1e-8, prof.mass()
    assert prof.lambda_c < 0.0

    assert breather.modes(1) == ["ST", "P"]
    assert breather.modes(2) == ["ST", "P", "H_x", "H_y"]

    res = breather.solve(1, 0.2, mode="ST")
    assert res.residual_inf <= 1e-12, res.residual_inf
    assert abs(res.field.norm() - 1.0) <= 1e-12
    assert res.coercivity_margin() > 0.0
    assert math.isclose(res.period, 2.0 * math.pi / abs(res.lambda_))
    sup, bound = res.field.sup_bound()
    assert sup <= bound

    field = breather.Field(2, 0.5, 3, [math.sin(i) for i in range(49)])
    grad_rel, mass_rel = field.fem_identities("H_x")
    assert grad_rel <= 1e-12 and mass_rel <= 1e-12

    rep = breather.convergence(1, [0.4, 0.2, 0.1], mode="P")
    assert rep["fitted_order_qmu"] >= 0.8, rep["fitted_order_qmu"]

    check = breather.solve(1, 0.5).period_check(400)
    assert check["dN"] <= 1e-12 and check["return_defect"] < 1e-3, check

    try:
        breather.solve(1, 0.2, mode="H_x")
    except ValueError:
        pass
    else:
        raise AssertionError("1D hybrid mode accepted")

    print(f"breather {breather.__version__}: ok")


if __name__ == "__main__":
    main()
