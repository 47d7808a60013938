"""Smoke test for the transposer_py extension.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import math

import transposer_py as tp


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    close(tp.hermite_eval(2, 3.0), (9.0 - 1.0) / 2.0, 1e-15)
    assert tp.basis_size(3, 2) == 10
    idx = tp.enumerate_indices(2, 2)
    assert idx == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
    g = tp.gram_matrix(3, 2)
    assert all(abs(g[i][j] - (i == j)) < 1e-12 for i in range(10) for j in range(10))

    # z_T = W(T) phi_1 with a zero driver: b is deterministic and equals r^(N-k-1)
    steps = 8
    sol = tp.solve_bsee(f"T=1\nN={steps}\nn=1\nM=1\nterminal.wt=1\n", verify=True)
    r = 1.0 / (1.0 + 1.0 / steps)
    for k, b in enumerate(sol["b_mean"]):
        close(b[0], r ** (steps - k - 1), 1e-13)
    assert sol["variational_residual"] < 1e-12

    picard = tp.solve_bsee(
        "T=1\nN=4\nn=2\nM=2\ndriver.kind=lipschitz\ndriver.fn=sin_tanh\nterminal.const=0.5,0.2\nterminal.wt=1,0.5\n",
        verify=True,
    )
    assert picard["converged"] and picard["variational_residual"] < 1e-8

    slq = tp.slq_solve("T=1\nN=16\nn=1\nM=1\nforward.y0=1\nforward.sigma=0.5\n")
    assert slq["converged"] and slq["residual"] < 1e-8
    hist = slq["cost_history"]
    assert all(b <= a * (1 + 1e-14) for a, b in zip(hist, hist[1:]))
    _, exact = tp.riccati_cost(1.0, 1.0, 0.5, steps=16, discrete=True)
    close(slq["cost"], exact, 1e-9 * exact)

    null = tp.nullctrl_solve("T=1\nN=16\nn=2\nM=1\nnullctrl.y0=1,0.5\n")
    assert null["terminal_energy"] <= 1e-4 * null["uncontrolled_energy"]
    close(null["verified_energy"], null["terminal_energy"], 1e-20)

    try:
        tp.solve_bsee("N=4\nn=1\nbogus=1\n")
    except ValueError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    lam = 1.0
    star = -2 * lam * math.exp(-lam) / (1 - math.exp(-2 * lam))
    print(f"smoke ok: slq cost {slq['cost']:.6f}, zT mode 1 {null['zT_mean'][0]:.4f} (continuous {star:.4f})")


if __name__ == "__main__":
    main()
