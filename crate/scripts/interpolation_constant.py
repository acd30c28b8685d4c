"""Derives the constants C_d of the velocity interpolation bound

    rho(x) <= C_d ||f||_inf^{2/(d+2)} (int |v|^2 f dv)^{d/(d+2)}.

Splitting the velocity integral at a radius R and using 1 - |v|^2/R^2 >= 0
inside the ball gives

    rho <= K / R^2 + 2 F omega_d R^d / (d + 2)

for F = ||f||_inf and K = int |v|^2 f dv. The bound is homogeneous, so it is
enough to minimize over R at F = K = 1. The minimum is attained by the
indicator of a ball, so it is the best possible constant. The script minimizes
numerically and prints the closed form next to it.
"""

import math

from scipy.optimize import minimize_scalar

OMEGA = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def truncation_bound(radius, d):
    return 1.0 / radius**2 + 2.0 * OMEGA[d] * radius**d / (d + 2)


def closed_form(d):
    return (((d + 2) / d) * OMEGA[d] ** (2.0 / d)) ** (d / (d + 2))


def main():
    for d in (1, 2, 3):
        res = minimize_scalar(truncation_bound, bounds=(1e-3, 10.0), args=(d,), method="bounded",
                              options={"xatol": 1e-12})
        print(f"d={d}  optimized={res.fun:.16f}  R*={res.x:.12f}  closed form={closed_form(d)!r}")


if __name__ == "__main__":
    main()
