"""Estimation and approximation sides of the dual pair on small random instances."""

import numpy as np

from fpidual.duality import DualityInstance, verify


def main():
    rng = np.random.default_rng(0)
    cases = [
        dict(p=2.0, q=2.0, eps=0.0, N=40, M=60),
        dict(p=np.inf, q=1.0, eps=0.1, N=6, M=6),
        dict(p=2.0, q=np.inf, eps=0.1, N=6, M=6),
        dict(p=1.5, q=2.0, eps=0.1, N=12, M=12),
    ]
    for case in cases:
        N, M = case.pop("N"), case.pop("M")
        inst = DualityInstance(rng.standard_normal((N, M)), S=rng.choice(N, N // 4, replace=False),
                               **case)
        rep = verify(inst, restarts=16)
        print(f"p={inst.p:<4} q={inst.q:<4} eps={inst.eps:<4} route={rep.lhs_route:<10} "
              f"lhs={rep.lhs:.6f} rhs={rep.rhs:.6f} gap={rep.gap:.1e} {rep.regime}")


if __name__ == "__main__":
    main()
