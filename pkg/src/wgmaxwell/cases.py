"""Manufactured solutions s1-s4 with hand-derived data.

For constant ``nu`` the data are ``f = nu * curl curl u - grad p`` and
``g = div u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .forms import ProblemData

Field = Callable[[np.ndarray], np.ndarray]
PI = np.pi


def _xyz(X):
    X = np.asarray(X, dtype=float)
    return X[..., 0], X[..., 1], X[..., 2]


def _vec(a, b, c, like):
    a, b, c = (np.broadcast_to(v, like.shape) for v in (a, b, c))
    return np.stack([a, b, c], axis=-1)


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Field
    p: Field
    curl_u: Field
    curl_curl_u: Field
    grad_p: Field
    div_u: Field
    homogeneous_p: bool = False

    def f(self, X, nu: float = 1.0):
        return nu * self.curl_curl_u(X) - self.grad_p(X)

    def g(self, X):
        return self.div_u(X)

    def problem_data(self, nu: float = 1.0) -> ProblemData:
        return ProblemData(
            f=lambda X: self.f(X, nu),
            g=self.g,
            u_boundary=self.u,
            p_boundary=self.p,
            nu=nu,
        )


# -- s1: linear u, constant p

def _s1_u(X):
    x, y, z = _xyz(X)
    return _vec(y - z, z - x, 3 * z - 2 * y, x)


def _s1_curl(X):
    x, _, _ = _xyz(X)
    return _vec(-3.0, -1.0, -2.0, x)


def _zero_vec(X):
    x, _, _ = _xyz(X)
    return _vec(0.0, 0.0, 0.0, x)


def _s1_p(X):
    x, _, _ = _xyz(X)
    return np.ones_like(x)


def _three(X):
    x, _, _ = _xyz(X)
    return np.full_like(x, 3.0)


# -- s2: bilinear u, p = xz

def _s2_u(X):
    x, y, z = _xyz(X)
    return _vec(y * z, z * x, 3 * z - 2 * y * x, x)


def _s2_curl(X):
    x, y, _ = _xyz(X)
    return _vec(-3 * x, 3 * y, 0.0, x)


def _s2_p(X):
    x, _, z = _xyz(X)
    return x * z


def _s2_grad_p(X):
    x, _, z = _xyz(X)
    return _vec(z, 0.0, x, x)


# -- s3: exponential / rational u, p = exp(-xyz)

def _s3_u(X):
    x, y, z = _xyz(X)
    return _vec(np.exp(y * z), z / (x + 1), np.exp(x * y), x)


def _s3_curl(X):
    x, y, z = _xyz(X)
    eyz, exy = np.exp(y * z), np.exp(x * y)
    return _vec(x * exy - 1 / (x + 1), y * eyz - y * exy, -z / (x + 1) ** 2 - z * eyz, x)


def _s3_curl_curl(X):
    x, y, z = _xyz(X)
    return _vec(-(y * y + z * z) * np.exp(y * z), -2 * z / (x + 1) ** 3, -(x * x + y * y) * np.exp(x * y), x)


def _s3_p(X):
    x, y, z = _xyz(X)
    return np.exp(-x * y * z)


def _s3_grad_p(X):
    x, y, z = _xyz(X)
    e = np.exp(-x * y * z)
    return _vec(-y * z * e, -x * z * e, -x * y * e, x)


def _zero(X):
    x, _, _ = _xyz(X)
    return np.zeros_like(x)


# -- s4: u = grad(sin sin sin) / pi, p = sin(2 pi x) sin(2 pi y) sin(2 pi z)

def _s4_u(X):
    x, y, z = _xyz(X)
    sx, sy, sz = np.sin(PI * x), np.sin(PI * y), np.sin(PI * z)
    cx, cy, cz = np.cos(PI * x), np.cos(PI * y), np.cos(PI * z)
    return _vec(cx * sy * sz, sx * cy * sz, sx * sy * cz, x)


def _s4_div(X):
    x, y, z = _xyz(X)
    return -3 * PI * np.sin(PI * x) * np.sin(PI * y) * np.sin(PI * z)


def _s4_p(X):
    x, y, z = _xyz(X)
    return np.sin(2 * PI * x) * np.sin(2 * PI * y) * np.sin(2 * PI * z)


def _s4_grad_p(X):
    x, y, z = _xyz(X)
    sx, sy, sz = np.sin(2 * PI * x), np.sin(2 * PI * y), np.sin(2 * PI * z)
    cx, cy, cz = np.cos(2 * PI * x), np.cos(2 * PI * y), np.cos(2 * PI * z)
    return 2 * PI * _vec(cx * sy * sz, sx * cy * sz, sx * sy * cz, x)


CASES = {
    "s1": ManufacturedCase("s1", _s1_u, _s1_p, _s1_curl, _zero_vec, _zero_vec, _three),
    "s2": ManufacturedCase("s2", _s2_u, _s2_p, _s2_curl, _zero_vec, _s2_grad_p, _three),
    "s3": ManufacturedCase("s3", _s3_u, _s3_p, _s3_curl, _s3_curl_curl, _s3_grad_p, _zero),
    "s4": ManufacturedCase("s4", _s4_u, _s4_p, _zero_vec, _zero_vec, _s4_grad_p, _s4_div,
                           homogeneous_p=True),
}


def derive_case_data(name: str) -> ManufacturedCase:
    try:
        return CASES[name]
    except KeyError:
        raise ValueError(f"unknown manufactured case {name!r}; choose from {sorted(CASES)}") from None
