"""Continuous-to-discrete maps for diagonal SSMs (zero-order hold and bilinear).

Both maps act state by state. Writing ``B_bar = f * B_tilde`` row-wise, each
method is fully described by the pair ``(lambda_bar, f)`` as a function of
``(lambda, delta)``; the ``*_partials`` helpers return the derivatives of that
pair, which the gradient code chains through.
"""

from dataclasses import dataclass

import numpy as np

from s5lab.errors import NumericalError, RejectedInputError

TAYLOR_THRESHOLD = 1e-8


@dataclass
class DiscreteDiagSSM:
    """Discretized diagonal system.

    ``Lambda_bar`` is ``(P,)`` for a time-invariant system or ``(L, P)`` when
    ``time_varying``; ``B_bar`` is ``(P, H)`` or ``(L, P, H)`` likewise.
    """

    Lambda_bar: np.ndarray
    B_bar: np.ndarray
    time_varying: bool = False

    @property
    def state_size(self):
        return self.Lambda_bar.shape[-1]


def _check_inputs(lam, B_tilde, delta):
    lam = np.asarray(lam, dtype=np.complex128)
    B_tilde = np.asarray(B_tilde, dtype=np.complex128)
    delta = np.asarray(delta, dtype=np.float64)
    if lam.ndim != 1 or B_tilde.ndim != 2 or B_tilde.shape[0] != lam.shape[0]:
        raise RejectedInputError(
            f"shape mismatch: Lambda {lam.shape}, B_tilde {B_tilde.shape}"
        )
    for name, arr in (("Lambda", lam), ("B_tilde", B_tilde), ("Delta", delta)):
        if not np.all(np.isfinite(arr)):
            raise RejectedInputError(f"{name} has non-finite entries")
    return lam, B_tilde, delta


def zoh_terms(lam, delta):
    """ZOH pair ``(exp(lam delta), (exp(lam delta) - 1) / lam)``, broadcasting.

    Uses a four-term Taylor series for ``|lam delta| < 1e-8``.
    """
    z = lam * delta
    lam_bar = np.exp(z)
    small = np.abs(z) < TAYLOR_THRESHOLD
    safe_lam = np.where(small, 1.0, lam)
    f = np.where(small,
                 delta * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0),
                 (lam_bar - 1.0) / safe_lam)
    return lam_bar, f


def zoh_partials(lam, delta):
    """Derivatives ``(dlam_bar/dlam, dlam_bar/ddelta, df/dlam, df/ddelta)``."""
    z = lam * delta
    lam_bar, f = zoh_terms(lam, delta)
    small = np.abs(z) < TAYLOR_THRESHOLD
    safe_lam = np.where(small, 1.0, lam)
    dlb_dlam = delta * lam_bar
    dlb_ddelta = lam * lam_bar
    df_dlam = np.where(small,
                       delta * delta * (0.5 + z / 3.0 + z * z / 8.0),
                       (delta * lam_bar - f) / safe_lam)
    df_ddelta = np.where(small, 1.0 + z + z * z / 2.0 + z * z * z / 6.0, lam_bar)
    return dlb_dlam, dlb_ddelta, df_dlam, df_ddelta


def bilinear_terms(lam, delta):
    """Tustin pair ``((1 + lam delta/2) / (1 - lam delta/2), delta / (1 - lam delta/2))``."""
    den = 1.0 - lam * delta / 2.0
    bad = den == 0
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NumericalError(f"bilinear transform is singular at state index {int(idx[-1])}")
    return (1.0 + lam * delta / 2.0) / den, delta / den


def bilinear_partials(lam, delta):
    den = 1.0 - lam * delta / 2.0
    den2 = den * den
    return delta / den2, lam / den2, delta * delta / (2.0 * den2), 1.0 / den2


def zoh(lam, B_tilde, delta):
    """Zero-order-hold discretization with a per-state timescale ``delta``.

    >>> d = zoh([-1.0], [[2.0]], [0.1])
    >>> round(d.Lambda_bar[0].real, 7), round(d.B_bar[0, 0].real, 7)
    (0.9048374, 0.1903252)
    """
    lam, B_tilde, delta = _check_inputs(lam, B_tilde, delta)
    if np.any(delta <= 0):
        raise RejectedInputError("timescales must be positive")
    lam_bar, f = zoh_terms(lam, np.broadcast_to(delta, lam.shape))
    return DiscreteDiagSSM(lam_bar, f[:, None] * B_tilde)


def bilinear(lam, B_tilde, delta):
    """Bilinear (Tustin) discretization with a per-state timescale ``delta``."""
    lam, B_tilde, delta = _check_inputs(lam, B_tilde, delta)
    lam_bar, f = bilinear_terms(lam, np.broadcast_to(delta, lam.shape))
    return DiscreteDiagSSM(lam_bar, f[:, None] * B_tilde)


def per_step_delta(log_delta, intervals):
    """Effective timescales ``intervals[..., k] * exp(log_delta[p])``.

    ``intervals`` of shape ``(L,)`` gives ``(L, P)``; a batch ``(B, L)`` gives
    ``(B, L, P)``.
    """
    intervals = np.asarray(intervals, dtype=np.float64)
    if intervals.ndim not in (1, 2):
        raise RejectedInputError("intervals must be (L,) or (B, L)")
    if not np.all(np.isfinite(intervals)):
        raise RejectedInputError("intervals have non-finite entries")
    if np.any(intervals < 0):
        raise RejectedInputError("intervals must be non-negative")
    return intervals[..., None] * np.exp(np.asarray(log_delta, dtype=np.float64))


def zoh_per_step(lam, B_tilde, log_delta, intervals):
    """Time-varying ZOH for irregularly sampled inputs.

    Step ``k`` uses timescale ``intervals[k] * exp(log_delta)``; a zero interval
    gives ``Lambda_bar = 1`` and ``B_bar = 0``.
    """
    lam, B_tilde, log_delta = _check_inputs(lam, B_tilde, log_delta)
    if np.ndim(intervals) != 1:
        raise RejectedInputError("intervals must be a 1-D vector")
    delta = per_step_delta(log_delta, intervals)
    lam_bar, f = zoh_terms(lam[None, :], delta)
    return DiscreteDiagSSM(lam_bar, f[:, :, None] * B_tilde[None, :, :], time_varying=True)
