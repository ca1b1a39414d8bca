"""Dot-product kernel spectra of random-feature models on the sphere.

Prints the first harmonic eigenvalues of the relu profile on S^2, checks the
trace identity and fits tail decay exponents for relu^alpha and tanh.
"""

import numpy as np

from fpidual.sphere import dyadic, eigenvalues_tk, fit_decay_exponent, kappa_profile


def main():
    spec = eigenvalues_tk(kappa_profile("relu", 3), 64)
    print("relu, d=3: first eigenvalues t_k with multiplicities")
    for k in range(6):
        print(f"  k={k}  N={int(spec.N[k]):3d}  t_k={spec.t[k]:.3e}")
    print(f"trace: kappa(1)={spec.kappa1:.6f}  partial sum={spec.partial_trace:.6f}")

    m = dyadic(16, 4096)
    for d, alpha in ((3, 1), (4, 1), (3, 2)):
        s = eigenvalues_tk(kappa_profile("relu", d, alpha=alpha), 64 if d == 3 else 40)
        slope, _, r2 = fit_decay_exponent(s, m, rooted=False)
        print(f"relu^{alpha}, d={d}: tail slope {slope:.3f} "
              f"(reference {-(2 * alpha + 1) / (d - 1):.3f}, r2={r2:.4f})")

    s = eigenvalues_tk(kappa_profile("tanh", 3), 64)
    print("tanh, d=3: m * tail(m) on dyadic m")
    print("  " + " ".join(f"{v:.1e}" for v in m * s.tail_sum(m.astype(float))))


if __name__ == "__main__":
    main()
