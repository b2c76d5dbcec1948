#!/usr/bin/env python3
# Copyright 2026 The weakfb Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent numpy/scipy reference values for the unit tests.

Usage: gen_fixtures.py [output.json]  (default tests/fixtures/oracles.json)
"""

import json
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

rng = np.random.default_rng(20261014)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def enc(m):
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return {"dim": m.shape[0], "entries": [[float(z.real), float(z.imag)] for z in m.reshape(-1)]}


def rand_herm(d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def rand_state(d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return r / np.trace(r).real


def rand_ket(d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def averaged_channel(rho, a, delta):
    w, v = np.linalg.eigh(a)
    r = v.conj().T @ rho @ v
    diff = w[:, None] - w[None, :]
    return v @ (r * np.exp(-diff**2 / (8 * delta**2))) @ v.conj().T


def trace_distance(p, q):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(p - q))))


def ptrace(rho, dims, keep):
    n = len(dims)
    t = rho.reshape(dims + dims)
    for k in reversed(range(n)):
        if k != keep:
            t = np.trace(t, axis1=k, axis2=k + t.ndim // 2)
    return t


def bloch(rho):
    return [float(np.trace(rho @ s).real) for s in (SX, SY, SZ)]


def kicked_top(rho, k, period, beta, kicks):
    u0 = expm(-1j * (beta / (2 * period)) * SX * period)
    for _ in range(kicks):
        rho = u0 @ rho @ u0.conj().T
        kick = expm(-1j * k * np.trace(rho @ SZ).real * SZ)
        rho = kick @ rho @ kick.conj().T
    return rho


def mean_field(r0, g, t):
    g = np.asarray(g)

    def rhs(_, r):
        return 2 * np.cross(g * r, r)

    sol = solve_ivp(rhs, (0, t), r0, method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1].tolist()


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests/fixtures/oracles.json"
    fx = {"propagators": [], "channels": [], "trace_distances": [], "partial_traces": [],
          "kicked_top": [], "mean_field": []}
    for d in (2, 3, 4):
        h = rand_herm(d)
        t = float(rng.uniform(0.1, 3.0))
        fx["propagators"].append({"h": enc(h), "t": t, "u": enc(expm(-1j * h * t))})
    for d, delta in ((2, 0.7), (3, 1.3), (4, 0.4)):
        rho, a = rand_state(d), rand_herm(d)
        fx["channels"].append({"rho": enc(rho), "a": enc(a), "delta": delta,
                               "out": enc(averaged_channel(rho, a, delta))})
    for d in (2, 3, 5):
        p, q = rand_state(d), rand_state(d)
        fx["trace_distances"].append({"a": enc(p), "b": enc(q), "value": trace_distance(p, q)})
    dims = [2, 3, 2]
    parts = [rand_state(d) for d in dims]
    joint = np.kron(np.kron(parts[0], parts[1]), parts[2])
    u = expm(-1j * rand_herm(12))
    entangled = u @ joint @ u.conj().T
    for keep in range(3):
        fx["partial_traces"].append({"rho": enc(entangled), "dims": dims, "keep": keep,
                                     "out": enc(ptrace(entangled, dims, keep))})
    for k, beta in ((3.0, np.pi / 2), (1.5, 1.0)):
        psi = rand_ket(2)
        rho0 = np.outer(psi, psi.conj())
        fx["kicked_top"].append({"k": k, "period": 1.0, "beta": float(beta), "kicks": 5, "rho0": enc(rho0),
                                 "bloch": bloch(kicked_top(rho0, k, 1.0, beta, 5))})
    for g in ((0.0, 0.0, 1.0), (0.5, -0.3, 0.8)):
        psi = rand_ket(2)
        r0 = bloch(np.outer(psi, psi.conj()))
        fx["mean_field"].append({"g": list(g), "r0": r0, "t": 5.0, "bloch": mean_field(r0, g, 5.0)})
    out.write_text(json.dumps(fx, indent=1) + "\n")


if __name__ == "__main__":
    main()
