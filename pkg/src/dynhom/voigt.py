"""Complex symmetric-tensor algebra in a fixed Voigt convention.

Components are ordered (11, 22, 33, 23, 31, 12). The map between rank-4
tensors and 6x6 matrices is *unscaled*: ``M[I, J] = T[i, j, k, l]`` with no
factor of 2 or sqrt(2). Contractions over a symmetric index pair therefore
carry the weight matrix ``W = diag(1, 1, 1, 2, 2, 2)`` explicitly, e.g. the
tensor product ``A:B`` of two rank-4 tensors is ``A_v @ W @ B_v``.
"""
import numpy as np

#: Index pairs of the Voigt ordering (11, 22, 33, 23, 31, 12), zero-based.
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (2, 0), (0, 1))

_VI = np.array([p[0] for p in VOIGT_PAIRS])
_VJ = np.array([p[1] for p in VOIGT_PAIRS])

# (i, j) -> Voigt index lookup, symmetric.
VOIGT_INDEX = np.empty((3, 3), dtype=int)
for _n, (_i, _j) in enumerate(VOIGT_PAIRS):
    VOIGT_INDEX[_i, _j] = _n
    VOIGT_INDEX[_j, _i] = _n

_W_DIAG = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
_W_DIAG.setflags(write=False)


def weight_matrix():
    """Return a fresh copy of ``W = diag(1, 1, 1, 2, 2, 2)``."""
    return np.diag(_W_DIAG)


def weight_diag():
    """Return the (read-only) diagonal of ``W``."""
    return _W_DIAG


def _minor_residual(t):
    scale = max(1.0, float(np.max(np.abs(t))))
    r1 = np.max(np.abs(t - np.swapaxes(t, -4, -3)))
    r2 = np.max(np.abs(t - np.swapaxes(t, -2, -1)))
    return max(r1, r2) / scale


def tensor4_to_voigt(t, tol=1e-10):
    """Map a minor-symmetric rank-4 tensor to its unscaled 6x6 Voigt matrix.

    Leading batch dimensions are preserved: ``(..., 3, 3, 3, 3) -> (..., 6, 6)``.

    Raises
    ------
    ValueError
        If ``t`` lacks minor symmetry beyond ``tol`` (relative).
    """
    t = np.asarray(t)
    if t.shape[-4:] != (3, 3, 3, 3):
        raise ValueError(f"expected trailing shape (3, 3, 3, 3), got {t.shape}")
    if _minor_residual(t) > tol:
        raise ValueError("tensor lacks minor symmetry T_ijkl = T_jikl = T_ijlk")
    return t[..., _VI[:, None], _VJ[:, None], _VI[None, :], _VJ[None, :]]


def voigt_to_tensor4(m):
    """Inverse of :func:`tensor4_to_voigt`."""
    m = np.asarray(m)
    idx = VOIGT_INDEX
    return m[..., idx[:, :, None, None], idx[None, None, :, :]]


def tensor3_to_voigt(t):
    """Map ``T[i, j, p]`` symmetric in (i, j) to a 6x3 matrix ``M[(ij), p]``."""
    t = np.asarray(t)
    return t[..., _VI, _VJ, :]


def tensor3_last_to_voigt(t):
    """Map ``T[p, i, j]`` symmetric in (i, j) to a 3x6 matrix ``M[p, (ij)]``."""
    t = np.asarray(t)
    return t[..., :, _VI, _VJ]


def tensor2_to_voigt(s):
    """Symmetric 3x3 -> 6-vector (no scaling)."""
    s = np.asarray(s)
    return s[..., _VI, _VJ]


def voigt_to_tensor2(v):
    """6-vector -> symmetric 3x3."""
    v = np.asarray(v)
    return v[..., VOIGT_INDEX]


def isotropic_stiffness(lam, mu):
    """Unscaled Voigt matrix of ``C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)``."""
    c = np.zeros((6, 6))
    c[:3, :3] = lam
    c[np.arange(3), np.arange(3)] += 2.0 * mu
    c[np.arange(3, 6), np.arange(3, 6)] = mu
    return c


def isotropic_compliance(lam, mu):
    """Unscaled Voigt matrix of the isotropic compliance tensor.

    ``D_ijkl = -lam / (2 mu (3 lam + 2 mu)) d_ij d_kl
    + (d_ik d_jl + d_il d_jk) / (4 mu)``.
    """
    d = np.zeros((6, 6))
    d[:3, :3] = -lam / (2.0 * mu * (3.0 * lam + 2.0 * mu))
    d[np.arange(3), np.arange(3)] += 1.0 / (2.0 * mu)
    d[np.arange(3, 6), np.arange(3, 6)] = 1.0 / (4.0 * mu)
    return d


def tensor_inverse(m):
    """Voigt matrix of the rank-4 inverse on symmetric tensors.

    For ``A_v`` the inverse ``B_v`` satisfies ``A_v W B_v W = W^{-1}``
    (the Voigt image of the symmetric identity), i.e.
    ``B_v = W^{-1} A_v^{-1} W^{-1}``.
    """
    winv = 1.0 / _W_DIAG
    return winv[:, None] * np.linalg.inv(m) * winv[None, :]


def symmetric_identity():
    """Voigt image of ``1^{4s}``: ``diag(1, 1, 1, 1/2, 1/2, 1/2)``."""
    return np.diag(1.0 / _W_DIAG)


def hermitian_residual(m):
    """Relative max-norm of ``M - M^H``, scaled by ``max(1, max|M|)``."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(m))))
    return float(np.max(np.abs(m - m.conj().T))) / scale


def relative_hermitian_residual(m):
    """Max-norm of ``M - M^H`` relative to ``max|M|`` (scale-free variant)."""
    m = np.asarray(m)
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T))) / scale
