"""HiPPO-LegS construction, its normal part, and S5 parameter initialization."""

from dataclasses import dataclass

import numpy as np

from s5lab import rng as rngmod
from s5lab.errors import RejectedInputError
from s5lab.linalg import hermitian_eig, inf_norm


def make_hippo_legs(N):
    """HiPPO-LegS state matrix and its SISO input vector.

    ``A[n, k] = -sqrt(2n+1) sqrt(2k+1)`` below the diagonal, ``-(n+1)`` on it,
    zero above; ``b[n] = sqrt(2n+1)``.
    """
    if N < 1:
        raise RejectedInputError(f"state size must be >= 1, got {N}")
    q = np.sqrt(2.0 * np.arange(N) + 1.0)
    A = -np.tril(np.outer(q, q), -1) - np.diag(np.arange(1.0, N + 1.0))
    return A, q.copy()


def make_p_legs(N):
    """Low-rank factor with ``A_legs = A_normal - p p^T``."""
    if N < 1:
        raise RejectedInputError(f"state size must be >= 1, got {N}")
    return np.sqrt(np.arange(N) + 0.5)


def make_hippo_normal(N):
    """Normal part of HiPPO-LegS, ``A_legs + p p^T``.

    The result equals ``-I/2`` plus a skew-symmetric matrix; the skew part is
    symmetrized explicitly so the identity is exact rather than approximate.
    """
    A, _ = make_hippo_legs(N)
    p = make_p_legs(N)
    An = A + np.outer(p, p)
    S = An + 0.5 * np.eye(N)
    S = 0.5 * (S - S.T)
    return S - 0.5 * np.eye(N)


def diagonalize_normal(A_normal):
    """Stable eigendecomposition of a ``-I/2 + skew`` matrix.

    ``i(A + I/2)`` is Hermitian, so its real spectrum ``mu`` and unitary
    eigenvectors come from :func:`hermitian_eig`, and ``A``'s eigenvalues are
    ``-1/2 - i mu``. Eigenvalues are returned with imaginary part descending.
    Conjugate pairs are made exact: the eigenvector of ``-1/2 - i mu`` for
    ``mu > 0`` is set to the conjugate of the one for ``-mu``, and a zero-frequency
    eigenvector (odd sizes) is made real.

    Returns:
        (Lambda, V) with ``A = V diag(Lambda) V^H``.
    """
    A = np.asarray(A_normal, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise RejectedInputError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    S = A + 0.5 * np.eye(n)
    if inf_norm(S + S.T) > 1e-10 * max(inf_norm(S), 1.0):
        raise RejectedInputError("A + I/2 is not skew-symmetric within tolerance")

    mu, V = hermitian_eig(1j * S)
    mu = mu.copy()
    V = V.copy()
    for i in range(n // 2):
        j = n - 1 - i
        mu[j] = -mu[i]
        V[:, j] = V[:, i].conj()
    if n % 2 == 1:
        m = n // 2
        mu[m] = 0.0
        v = V[:, m]
        piv = np.argmax(np.abs(v))
        v = v * (abs(v[piv]) / v[piv])
        v = v.real.astype(np.complex128)
        V[:, m] = v / np.linalg.norm(v)

    # real part set by construction, not taken from the solver
    lam = np.empty(n, dtype=np.complex128)
    lam.real = -0.5
    lam.imag = -mu
    recon = inf_norm(A - (V * lam[None, :]) @ V.conj().T)
    if recon > 1e-10 * max(inf_norm(A), 1.0):
        raise RejectedInputError(f"diagonalization residual {recon:.3e} too large")
    return lam, V


def block_diag_hippo(P, J):
    """Spectrum and eigenvectors of a block-diagonal matrix of ``J`` HiPPO-N blocks."""
    if J < 1 or P < 1 or P % J != 0:
        raise RejectedInputError(f"block count J={J} must divide state size P={P}")
    R = P // J
    lam_b, V_b = diagonalize_normal(make_hippo_normal(R))
    lam = np.tile(lam_b, J)
    V = np.zeros((P, P), dtype=np.complex128)
    for j in range(J):
        V[j * R:(j + 1) * R, j * R:(j + 1) * R] = V_b
    return lam, V


@dataclass(frozen=True)
class HippoSpec:
    state_size: int
    feature_size: int
    blocks: int = 1
    conj_sym: bool = False
    delta_min: float = 0.001
    delta_max: float = 0.1
    seed: int = 0
    bidirectional: bool = False

    def validate(self):
        P, J = self.state_size, self.blocks
        if P < 1 or self.feature_size < 1 or J < 1:
            raise RejectedInputError("state_size, feature_size and blocks must be >= 1")
        if P % J != 0:
            raise RejectedInputError(f"blocks={J} must divide state_size={P}")
        if not 0.0 < self.delta_min < self.delta_max:
            raise RejectedInputError("need 0 < delta_min < delta_max")
        if self.conj_sym and (P // J) % 2 != 0:
            raise RejectedInputError(
                "conj_sym needs an even block size so every eigenvalue has a distinct conjugate partner"
            )


@dataclass
class ContinuousDiagSSM:
    """Learnable continuous-time diagonal SSM.

    Attributes:
        Lambda: diagonal state matrix, ``(P_stored,)`` complex.
        B_tilde: input matrix, ``(P_stored, H)`` complex.
        C_tilde: output matrix, ``(H, P_stored)`` or ``(H, 2 P_stored)`` when
            bidirectional.
        D: feedthrough, ``(H,)`` real.
        log_delta: log timescales, ``(P_stored,)`` real.
        conj_sym: only one eigenvalue of each conjugate pair is stored.
    """

    Lambda: np.ndarray
    B_tilde: np.ndarray
    C_tilde: np.ndarray
    D: np.ndarray
    log_delta: np.ndarray
    conj_sym: bool = False

    @property
    def state_size(self):
        return self.Lambda.shape[0]

    @property
    def feature_size(self):
        return self.B_tilde.shape[1]

    @property
    def bidirectional(self):
        return self.C_tilde.shape[1] == 2 * self.state_size

    def copy(self):
        return ContinuousDiagSSM(
            self.Lambda.copy(), self.B_tilde.copy(), self.C_tilde.copy(),
            self.D.copy(), self.log_delta.copy(), self.conj_sym,
        )


def conjugate_half_indices(lam, J):
    """Indices of the stored half (``Im > 0``) of each block's spectrum.

    Verifies that the discarded half is exactly the conjugate of the stored half.
    """
    P = lam.shape[0]
    R = P // J
    keep = []
    for j in range(J):
        blk = lam[j * R:(j + 1) * R]
        half = R // 2
        stored, dropped = blk[:half], blk[half:][::-1]
        if not np.array_equal(dropped, stored.conj()) or np.any(stored.imag <= 0):
            raise RejectedInputError("spectrum is not an exact set of conjugate pairs")
        keep.extend(range(j * R, j * R + half))
    return np.array(keep, dtype=np.int64)


def init_continuous_ssm(spec):
    """Initialize S5 parameters from a (block-diagonal) HiPPO-N matrix.

    ``B_tilde = V^H B`` and ``C_tilde = C V`` with ``B``, ``C`` drawn i.i.d.
    ``N(0, 1/P)``; ``D ~ N(0, 1)``; ``log_delta ~ U[log delta_min, log delta_max)``.
    With ``conj_sym`` only the eigenvalues with positive imaginary part (and the
    matching rows of ``B_tilde`` / columns of ``C_tilde``) are kept.
    """
    spec.validate()
    P, H, J = spec.state_size, spec.feature_size, spec.blocks
    lam, V = block_diag_hippo(P, J)

    std = 1.0 / np.sqrt(P)
    B = rngmod.make_rng(spec.seed, rngmod.STREAM_B).normal(0.0, std, size=(P, H))
    C = rngmod.make_rng(spec.seed, rngmod.STREAM_C).normal(0.0, std, size=(H, P))
    D = rngmod.make_rng(spec.seed, rngmod.STREAM_D).standard_normal(H)

    B_tilde = V.conj().T @ B
    C_tilde = C @ V
    if spec.conj_sym:
        keep = conjugate_half_indices(lam, J)
        lam, B_tilde, C_tilde = lam[keep], B_tilde[keep], C_tilde[:, keep]
    if spec.bidirectional:
        C2 = rngmod.make_rng(spec.seed, rngmod.STREAM_C_BACKWARD).normal(0.0, std, size=(H, P))
        C2_tilde = C2 @ V
        if spec.conj_sym:
            C2_tilde = C2_tilde[:, keep]
        C_tilde = np.concatenate([C_tilde, C2_tilde], axis=1)

    Ps = lam.shape[0]
    lo, hi = np.log(spec.delta_min), np.log(spec.delta_max)
    log_delta = rngmod.make_rng(spec.seed, rngmod.STREAM_LOG_DELTA).uniform(lo, hi, size=Ps)
    return ContinuousDiagSSM(
        Lambda=lam.astype(np.complex128),
        B_tilde=np.ascontiguousarray(B_tilde),
        C_tilde=np.ascontiguousarray(C_tilde),
        D=D,
        log_delta=log_delta,
        conj_sym=spec.conj_sym,
    )
