"""Independent reference values for the scalar quadratic game.

Derivation (scalar, c_l = 1): with Y = P X + S mbar and a = -Y,
  P' = P^2 + r P - (q + f k),     P(T) = g k
  S' = f k rho + P S + S (P + S) + r S,  S(T) = -g k rho
where k = 1 for the mean field game and k = 1 - rho / N for the open-loop
N-player game. The cost follows from the idiosyncratic variance v and the
conditional-mean second moment M:
  v' = -2 P v + sigma^2,  M' = -2 (P + S) M + sigma0^2.
Run: python3 riccati_oracle.py
"""
import numpy as np
from scipy.integrate import solve_ivp

SIG, SIG0, MU0, LAM0 = 0.5, 0.2, 2.0, 0.25


def riccati(q, f, rho, g, T, r=0.0, N=None):
    k = 1.0 if N is None else 1.0 - rho / N

    def rhs(t, u):
        P, S = u
        return [P * P + r * P - (q + f * k), f * k * rho + P * S + S * (P + S) + r * S]

    sol = solve_ivp(rhs, [T, 0.0], [g * k, -g * k * rho], rtol=1e-13, atol=1e-14, dense_output=True)
    return sol.sol


def cost(q, f, rho, g, T, r=0.0):
    PS = riccati(q, f, rho, g, T, r)

    def rhs(t, u):
        v, M, J = u
        P, S = PS(t)
        Ea2 = P * P * v + (P + S) ** 2 * M
        run = 0.5 * Ea2 + 0.5 * q * (v + M) + 0.5 * f * (v + (1 - rho) ** 2 * M)
        return [-2 * P * v + SIG**2, -2 * (P + S) * M + SIG0**2, np.exp(-r * t) * run]

    sol = solve_ivp(rhs, [0.0, T], [LAM0, MU0**2, 0.0], rtol=1e-13, atol=1e-14)
    v, M, J = sol.y[:, -1]
    return J + np.exp(-r * T) * 0.5 * g * (v + (1 - rho) ** 2 * M)


def y0_mean(q, f, rho, g, T, r=0.0):
    P, S = riccati(q, f, rho, g, T, r)(0.0)
    return (P + S) * MU0


def gap(q, f, rho, g, T, N, r=0.0):
    a, b = riccati(q, f, rho, g, T, r), riccati(q, f, rho, g, T, r, N)
    ts = np.linspace(0, T, 20001)
    return max(abs(b(t)[0] - a(t)[0]) + abs(b(t)[1] - a(t)[1]) for t in ts)


def closed_form_P(q, g, T, t):
    k = np.sqrt(q)
    th = np.tanh(k * (T - t))
    return k * (g + k * th) / (k + g * th)


if __name__ == "__main__":
    np.set_printoptions(precision=15)
    print("default T=1: Y0 mean %.12f cost %.12f" % (y0_mean(1, 1, 1, 1, 1), cost(1, 1, 1, 1, 1)))
    print("T=5:         Y0 mean %.12f cost %.12f" % (y0_mean(1, 1, 1, 1, 5), cost(1, 1, 1, 1, 5)))
    print("T=0.5:       Y0 mean %.12f" % y0_mean(1, 1, 1, 1, 0.5))
    for N in (2, 8):
        P, S = riccati(1, 1, 1, 1, 1, N=N)(0.0)
        print("N=%d: P(0) %.12f S(0) %.12f" % (N, P, S))
    for N in (8, 16, 32, 64):
        print("gap N=%d %.12e" % (N, gap(1, 1, 1, 1, 1, N)))
    P, S = riccati(1, 0, 0.5, 0.7, 1)(0.0)
    print("f=0 P(0) %.12f closed form %.12f" % (P, closed_form_P(1, 0.7, 1, 0.0)))
    # Discounted: long horizon approaches the stationary point.
    P, S = riccati(1, 1, 1, 0, 40, r=1)(0.0)
    print("stationary r=1: P %.12f S %.12f" % (P, S))
    print("discounted cost T=8 r=1 g=0: %.12f" % cost(1, 1, 1, 0, 8, r=1))
    # Deterministic conditional mean: x' = -(P + S) x, x(0) = mu0.
    PS = riccati(1, 1, 1, 1, 1)
    xs = solve_ivp(lambda t, u: [-(PS(t)[0] + PS(t)[1]) * u[0]], [0, 1], [MU0], rtol=1e-13, atol=1e-14)
    print("mean ODE x(1) %.12f" % xs.y[0, -1])
    print("stationary N=8 r=1 g=0: P %.12f S %.12f" % tuple(riccati(1, 1, 1, 0, 60, r=1, N=8)(0.0)))
