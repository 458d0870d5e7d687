"""Pointwise algebra of (1,1) and (n-1,n-1) forms on C^n.

Conventions
-----------
A real (1,1) form  a = i * a_{jk} dz^j ^ dzbar^k  is stored as its Hermitian
coefficient matrix ``a`` (shape (n, n), complex).  A Kahler/Hermitian metric
is a positive definite such matrix; the associated volume normalisation is
omega^n = n! det(g) * E with E = e_1^...^e_n, e_j = i dz^j ^ dzbar^j.

An (n-1,n-1) form is stored as the Hermitian matrix ``psi`` with respect to
the signed basis

    psi_form = i^{n-1} (n-1)! * sum_{j,k} sgn(j,k) psi_{jk} *
               [dz^1^dzbar^1 ^ ... ^ dz^j-omitted ... dzbar^k-omitted ... ]

with sgn(j,k) = -1 for j > k and +1 otherwise.  Under this convention the
coefficient matrix of omega^{n-1} is the cofactor matrix of g, so
det(omega^{n-1}) = (det g)^{n-1}, and the pairing of an (n-1,n-1) form with
a (1,1) form x is

    psi_form ^ x_form = (n-1)! * sum_{jk} psi_{jk} x_{jk} * E.

All operations broadcast over leading axes, so a "matrix" argument may be a
whole grid of pointwise matrices with shape (..., n, n).

Everything here is a pure function of its arguments; values are safe to share
between threads and to evaluate in parallel over grid points.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

__all__ = [
    "ConeError",
    "hermitize",
    "is_hermitian",
    "check_metric",
    "trace_pair",
    "wedge11_invariant",
    "hodge_star_11",
    "hodge_star_n1",
    "wedge_power_n_minus_one",
    "pairing_over_volume",
    "wedge_with_omega_power",
    "det_form_top_minus_one",
    "root_n_minus_one",
    "updated_metric",
    "trace_reverse",
    "is_n_minus_one_psh",
    "cone_margin",
    "generalized_eigenvalues",
    "trace_reverse_weighted",
    "linearization_coefficients",
]

DEFAULT_CONE_TOL = 1e-10


class ConeError(ValueError):
    """A form or metric left the positive cone it was required to be in."""


def hermitize(a):
    """Project onto Hermitian matrices, (a + a*)/2.

    Absorbs one-ulp asymmetry from upstream arithmetic so that eigensolvers
    downstream see exactly Hermitian input.
    """
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def is_hermitian(a, rtol=1e-14):
    a = np.asarray(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return True
    dev = np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))))
    return bool(dev <= rtol * max(scale, 1.0) * 2.0)


def _cholesky_or_raise(g):
    try:
        return np.linalg.cholesky(np.asarray(g, dtype=complex))
    except np.linalg.LinAlgError:
        raise ValueError("metric not invertible") from None


def check_metric(g):
    """Raise ValueError('metric not invertible') unless g is Hermitian positive definite."""
    _cholesky_or_raise(g)


def _inv_metric(g):
    check_metric(g)
    return np.linalg.inv(np.asarray(g, dtype=complex))


def trace_pair(g, a):
    """Metric trace of a (1,1) form: g^{jk-bar} a_{jk} = tr(g^{-1} a).

    Real for Hermitian inputs; the tiny imaginary residue is dropped.
    """
    ginv = _inv_metric(g)
    return np.einsum("...ab,...ba->...", ginv, np.asarray(a, dtype=complex)).real


def wedge11_invariant(g, a, b):
    """The scalar n(n-1) * (a ^ b ^ omega^{n-2}) / omega^n.

    Equals (tr_g a)(tr_g b) - tr(g^{-1} a g^{-1} b); for n = 2 the
    omega^{n-2} factor is the empty wedge and the identity still holds.
    """
    ginv = _inv_metric(g)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ta = np.einsum("...ab,...ba->...", ginv, a)
    tb = np.einsum("...ab,...ba->...", ginv, b)
    cross = np.einsum("...ab,...bc,...cd,...da->...", ginv, a, ginv, b)
    return (ta * tb - cross).real


def _det_real(a):
    return np.linalg.det(np.asarray(a, dtype=complex)).real


def _bcast(scalar):
    """Append two axes so a (batched or plain) scalar multiplies (..., n, n) arrays."""
    return np.asarray(scalar)[..., None, None]


def hodge_star_11(g, a):
    """Hodge star of a (1,1) form, returned as an (n-1,n-1) coefficient matrix.

    psi = det(g) * (g^{-1} a g^{-1})^T / (n-1)!.
    """
    n = np.asarray(a).shape[-1]
    ginv = _inv_metric(g)
    core = np.einsum("...ab,...bc,...cd->...ad", ginv, np.asarray(a, dtype=complex), ginv)
    return np.swapaxes(core, -1, -2) * _bcast(_det_real(g) / math.factorial(n - 1))


def hodge_star_n1(g, psi):
    """Hodge star of an (n-1,n-1) coefficient matrix, returned as a (1,1) matrix.

    a = (n-1)! * g psi^T g / det(g); inverse of :func:`hodge_star_11`
    (the star squares to +1 on these bidegrees).
    """
    n = np.asarray(psi).shape[-1]
    g = np.asarray(g, dtype=complex)
    check_metric(g)
    core = np.einsum("...ab,...bc,...cd->...ad", g, np.swapaxes(np.asarray(psi, dtype=complex), -1, -2), g)
    return core * _bcast(math.factorial(n - 1) / _det_real(g))


def _cofactor(a):
    """Cofactor matrix adj(a)^T, stable for (near-)singular input via minors for small n."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    if n == 1:
        return np.ones_like(a)
    out = np.empty_like(a)
    idx = list(range(n))
    for i in range(n):
        rows = idx[:i] + idx[i + 1:]
        for j in range(n):
            cols = idx[:j] + idx[j + 1:]
            minor = a[..., rows, :][..., :, cols]
            out[..., i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return out


def wedge_power_n_minus_one(a):
    """Coefficient matrix of the (n-1)-fold wedge power of a (1,1) form.

    This is the cofactor matrix of ``a`` (for invertible a, det(a) * a^{-T}).
    """
    return _cofactor(a)


def pairing_over_volume(g, psi, x):
    """(psi_form ^ x_form) / omega^n = tr(psi x^T) / (n det g)."""
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[-1]
    num = np.einsum("...ab,...ab->...", psi, np.asarray(x, dtype=complex)).real
    return num / (n * _det_real(g))


def wedge_with_omega_power(g, a):
    """Coefficient matrix of a ^ omega^{n-2} for a (1,1) form a.

    psi = det(g) * ((tr_g a) g^{-1} - g^{-1} a g^{-1})^T / (n-1); its star
    over (n-1)! is the trace-reversal ((tr_g a) g - a)/(n-1).
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    ginv = _inv_metric(g)
    t = np.einsum("...ab,...ba->...", ginv, a)
    core = _bcast(t) * np.broadcast_to(ginv, a.shape) \
        - np.einsum("...ab,...bc,...cd->...ad", ginv, a, ginv)
    return np.swapaxes(core, -1, -2) * _bcast(_det_real(g) / (n - 1))


def det_form_top_minus_one(psi):
    """Determinant of an (n-1,n-1) form's coefficient matrix (real for Hermitian psi)."""
    return _det_real(psi)


def root_n_minus_one(g, psi):
    """Unique Hermitian metric S with S^{n-1} = psi (as wedge power of forms).

    Closed form: psi is the cofactor matrix of S, i.e. psi^T = det(S) S^{-1},
    so S = (det psi)^{1/(n-1)} (psi^{-1})^T.  The result does not depend on g;
    the metric only enters the positivity test (psi positive iff the (1,1)
    form star(psi)/(n-1)! is, and the two matrices are congruent).
    """
    psi = hermitize(psi)
    n = psi.shape[-1]
    check_metric(g)
    lam = np.linalg.eigvalsh(psi)
    if np.min(lam) <= 0.0:
        raise ConeError("form not in positive cone")
    d = _det_real(psi)
    s = np.swapaxes(np.linalg.inv(psi), -1, -2) * _bcast(np.power(d, 1.0 / (n - 1)))
    return hermitize(s)


def trace_reverse(g, a):
    """(tr_g a) g - a.  For n = 2 this is the adjugate taken in the g-frame."""
    g = np.asarray(g, dtype=complex)
    a = np.asarray(a, dtype=complex)
    return _bcast(trace_pair(g, a)) * np.broadcast_to(g, a.shape) - a


def updated_metric(g, h, hess):
    """The updated Hermitian metric h + ((tr_g hess) g - hess) / (n-1).

    Its g-trace is tr_g h + tr_g hess identically.
    """
    n = np.asarray(g).shape[-1]
    return np.asarray(h, dtype=complex) + trace_reverse(g, hess) / (n - 1)


def is_n_minus_one_psh(hess, tol=DEFAULT_CONE_TOL):
    """True iff every sum of n-1 eigenvalues of hess is >= -tol.

    Equivalent to all eigenvalues of (tr hess) I - hess being >= -tol, since
    the complementary eigenvalue of the trace-reversal is exactly such a sum.
    """
    hess = hermitize(hess)
    n = hess.shape[-1]
    tr = np.trace(hess, axis1=-2, axis2=-1).real
    lam = np.linalg.eigvalsh(_bcast(tr) * np.eye(n) - hess)
    return bool(np.min(lam) >= -tol)


def generalized_eigenvalues(g, a):
    """Eigenvalues of a relative to the metric g (ascending).

    Computed by Cholesky congruence: eig of C^{-1} a C^{-*} with g = C C^*,
    which keeps the problem Hermitian for positive g.
    """
    c = _cholesky_or_raise(g)
    a = np.asarray(a, dtype=complex)
    cinv = np.linalg.inv(c)
    m = np.einsum("...ab,...bc,...dc->...ad", cinv, a, np.conj(cinv))
    return np.linalg.eigvalsh(hermitize(m))


def cone_margin(g, gu):
    """Smallest generalized eigenvalue of gu relative to g; > 0 iff gu > 0."""
    return generalized_eigenvalues(g, gu)[..., 0]


def trace_reverse_weighted(g, gu):
    """(tr_g gu) g - (n-1) gu.

    In a frame diagonalising (g, gu) with eigenvalues lam_i, its eigenvalues
    relative to g are sum_j lam_j - (n-1) lam_i, so its largest eigenvalue is
    pinched between the largest lam and (n-1) times it.
    """
    n = np.asarray(g).shape[-1]
    g = np.asarray(g, dtype=complex)
    gu = np.asarray(gu, dtype=complex)
    lead = _bcast(trace_pair(g, gu)) * np.broadcast_to(g, gu.shape)
    return lead - (n - 1) * gu


def linearization_coefficients(g, gu):
    """Raised-index coefficient matrix W of the linearized operator.

    The linearization of u -> log det(updated_metric(g, h, hess u)) acts on a
    Hessian matrix V as sum_{ab} W_{ab} V_{ba} = ((tr_gu g) tr(g^{-1} V)
    - tr(gu^{-1} V)) / (n-1); W = ((tr_gu g) g^{-1} - gu^{-1}) / (n-1) is
    Hermitian positive definite whenever g and gu are metrics.
    """
    g = np.asarray(g, dtype=complex)
    gu = np.asarray(gu, dtype=complex)
    n = g.shape[-1]
    ginv = np.linalg.inv(g)
    guinv = np.linalg.inv(gu)
    t = np.einsum("...ab,...ba->...", guinv, np.broadcast_to(g, gu.shape)).real
    lead = _bcast(t) * np.broadcast_to(ginv, guinv.shape)
    return (lead - guinv) / (n - 1)


def subset_sums_nonneg(eigs, k, tol):
    """Direct enumeration oracle: every sum of k eigenvalues >= -tol."""
    eigs = np.asarray(eigs, dtype=float)
    worst = min(sum(c) for c in itertools.combinations(eigs.tolist(), k))
    return worst >= -tol
