"""Reference forward pass for the LSTM golden-value test.

Parameters and inputs are closed-form so the C++ test can rebuild them
without sharing a random generator. Layout: Wx[4H,I], Wh[4H,H], b[4H]
(gates i, f, g, o), W1[P,H+S], b1[P], w2[P], b2.
"""
import numpy as np

I, H, S, P, L = 2, 32, 9, 16, 16
SHIFT = 1.5


def params():
    n = 4 * H * I + 4 * H * H + 4 * H + P * (H + S) + P + P + 1
    k = np.arange(n, dtype=np.float64)
    return 0.1 * np.sin(0.37 * k + 0.1)


def window():
    t = np.arange(L, dtype=np.float64)
    x = np.stack([np.sin(0.5 * t), np.cos(0.3 * t) - 0.2], axis=1)
    s = 0.1 * np.arange(S, dtype=np.float64) - 0.3
    return x, s


def forward(w, x, s):
    o = 0
    Wx = w[o:o + 4 * H * I].reshape(4 * H, I); o += 4 * H * I
    Wh = w[o:o + 4 * H * H].reshape(4 * H, H); o += 4 * H * H
    b = w[o:o + 4 * H]; o += 4 * H
    W1 = w[o:o + P * (H + S)].reshape(P, H + S); o += P * (H + S)
    b1 = w[o:o + P]; o += P
    w2 = w[o:o + P]; o += P
    b2 = w[o]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(L):
        a = Wx @ x[t] + Wh @ h + b
        i, f, g, og = sig(a[:H]), sig(a[H:2 * H]), np.tanh(a[2 * H:3 * H]), sig(a[3 * H:])
        c = f * c + i * g
        h = og * np.tanh(c)
    r = np.tanh(W1 @ np.concatenate([h, s]) + b1)
    y = w2 @ r + b2
    return np.log1p(np.exp(y + SHIFT)) - SHIFT


if __name__ == "__main__":
    x, s = window()
    print(f"{forward(params(), x, s):.17g}")
