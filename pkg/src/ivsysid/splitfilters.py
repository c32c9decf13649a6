"""Sample-split filter banks and regression design assembly.

Measurements inside a span of 2N consecutive samples are split by parity
into two interleaved N-point grids of step 2h. The "hat" filters (responses
and regressors) read one parity class, the "tilde" filter (instruments)
reads the other, and both target the same off-grid physical time, the
midpoint between the classes' last samples. Because the two classes carry
disjoint measurement noise, the instruments are noise-independent of the
regressors row by row, which is what removes the errors-in-variables bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.signal import correlate

from .polyfilter import FilterSpec, FilterWeights, build_filter


class EmptyDesignError(ValueError):
    """Not enough samples to place a single regression window."""


@dataclass(frozen=True)
class OperatorKind:
    """What the response operator measures: a shift or a derivative."""

    tag: Literal["shift", "derivative"]
    order: int

    def __post_init__(self):
        if self.tag not in ("shift", "derivative"):
            raise ValueError(f"unknown operator tag {self.tag!r}")
        if self.order < 0:
            raise ValueError("operator order must be >= 0")


def model_operators(mode: str) -> tuple[OperatorKind, OperatorKind]:
    """The (H, G) operator pair for a model class.

    Discrete-time models regress the shifted state on features of the current
    state; continuous-time models regress the time derivative.
    """
    if mode == "discrete":
        return OperatorKind("shift", 1), OperatorKind("shift", 0)
    if mode == "continuous":
        return OperatorKind("derivative", 1), OperatorKind("derivative", 0)
    raise ValueError(f"mode must be 'continuous' or 'discrete', got {mode!r}")


@dataclass(frozen=True)
class SplitFilterBank:
    """The three stencils of one split design.

    hat_H estimates the response (derivative in continuous mode, shifted
    value in discrete mode) and hat_G the state, both from one parity class;
    tilde_G estimates the state from the other class. All three live on
    windows of base_window samples with step 2*base_step, so one design row
    spans 2*base_window raw samples.
    """

    hat_H: FilterWeights
    hat_G: FilterWeights
    tilde_G: FilterWeights
    mode: Literal["continuous", "discrete"]
    base_window: int
    base_step: float


def build_split_bank(mode: str, N: int, h: float, p: int) -> SplitFilterBank:
    """Construct the hat/tilde stencils, N taps each at doubled step 2h.

    The two parity classes each contain N samples spaced 2h apart, offset by
    h from each other, covering 2N raw samples together. On the doubled grid
    the physical target sits a quarter step before the natural center
    location (1 + N)/2 of the later class and a quarter step after that of
    the earlier class, hence the -1/4 (hat) and +1/4 (tilde) location
    shifts. In discrete mode the response filter targets half a doubled-grid
    step past that point, so the learned map advances the state by h.

    Args:
        mode: "continuous" (response = derivative) or "discrete" (= shift).
        N: taps per filter; must be even.
        h: base sample spacing.
        p: exactness degree of all three stencils; at most N.

    Returns:
        SplitFilterBank with the three solved stencils.

    Raises:
        ValueError: N odd or mode unknown.
        FilterRankError: p > N.
    """
    model_operators(mode)  # validates mode
    if N % 2 != 0:
        raise ValueError(f"window size must be even for the parity split, got {N}")
    step = 2.0 * h
    center = (1 + N) / 2.0
    d_H = 1 if mode == "continuous" else 0
    loc_H = center if mode == "continuous" else (2 + N) / 2.0

    hat_H = build_filter(FilterSpec(N, step, loc_H - 0.25, d_H, p, max_derivative=d_H))
    hat_G = build_filter(FilterSpec(N, step, center - 0.25, 0, p, max_derivative=0))
    tilde_G = build_filter(FilterSpec(N, step, center + 0.25, 0, p, max_derivative=0))
    return SplitFilterBank(
        hat_H=hat_H,
        hat_G=hat_G,
        tilde_G=tilde_G,
        mode=mode,  # type: ignore[arg-type]
        base_window=N,
        base_step=h,
    )


@dataclass(frozen=True)
class DesignMatrices:
    """Stacked regression data over the placed windows.

    X holds features of the hat-filtered state, Y the hat-filtered response,
    Z the truncated features of the tilde-filtered state. Rows whose times
    differ by at least window_span * h were built from windows with no raw
    samples in common.
    """

    X: np.ndarray  # (n', d_phi)
    Y: np.ndarray  # (n', d_H)
    Z: np.ndarray  # (n', d_phi)
    times: np.ndarray  # (n',)
    window_span: int


def rho_truncate(x: np.ndarray, mu: float) -> np.ndarray:
    """Radially shrink vectors to norm < mu: x -> x / (1 + ||x||/mu).

    Operates on the last axis, so a matrix of row vectors is truncated row by
    row. The map is the identity up to O(||x||/mu) near the origin and caps
    the norm at mu, which tames heavy-tailed feature products.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / (1.0 + norms / mu)


def _sparse_kernel(coefs: np.ndarray, span: int, parity: int) -> np.ndarray:
    # Embed the doubled-grid stencil into a length-span kernel over the raw
    # samples; parity 0 = earlier class (local offsets 0, 2, ...), 1 = later.
    kern = np.zeros(span)
    kern[parity::2] = coefs
    return kern


def _filtered(measurements: np.ndarray, kern: np.ndarray, stride: int) -> np.ndarray:
    cols = [
        correlate(measurements[:, c], kern, mode="valid")[::stride]
        for c in range(measurements.shape[1])
    ]
    return np.stack(cols, axis=1)


def assemble_design(
    measurements: np.ndarray,
    bank: SplitFilterBank,
    feature_map: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mu: float,
    stride: int = 1,
) -> DesignMatrices:
    """Slide the split windows over a measurement series and stack the rows.

    Sample i (0-based row of `measurements`) is taken to sit at time
    (i + 1) * h. Windows span 2N raw samples (N per parity class) and start
    at offsets 0, stride, 2*stride, ... as long as they fit; trailing samples
    that do not fill a window are dropped. For the window at offset w the
    regression time is t = (w + N + 1/2) * h and

        X row  = feature_map(t, hat_G state estimate)       (later parity)
        Y row  = hat_H response estimate                    (later parity)
        Z row  = rho_truncate(feature_map(t, tilde_G state estimate), mu)
                                                            (earlier parity)

    feature_map must broadcast: given a (n',) time vector and (n', d_y)
    states it returns (n', d_phi) features.

    Raises:
        EmptyDesignError: fewer samples than one window.
    """
    measurements = np.asarray(measurements, dtype=float)
    if measurements.ndim == 1:
        measurements = measurements[:, None]
    n = measurements.shape[0]
    N, h = bank.base_window, bank.base_step
    span = 2 * N
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if n < span:
        raise EmptyDesignError(f"need at least {span} samples for one window, got {n}")

    kern_H = _sparse_kernel(
        bank.hat_H.coefficients[bank.hat_H.spec.derivative_order], span, parity=1
    )
    kern_G = _sparse_kernel(bank.hat_G.coefficients[0], span, parity=1)
    kern_T = _sparse_kernel(bank.tilde_G.coefficients[0], span, parity=0)

    resp = _filtered(measurements, kern_H, stride)
    state_hat = _filtered(measurements, kern_G, stride)
    state_tilde = _filtered(measurements, kern_T, stride)

    offsets = np.arange(0, n - span + 1, stride)
    times = (offsets + N + 0.5) * h

    X = np.asarray(feature_map(times, state_hat), dtype=float)
    Z_raw = np.asarray(feature_map(times, state_tilde), dtype=float)
    if X.ndim != 2 or X.shape[0] != times.shape[0]:
        raise ValueError(
            f"feature_map returned shape {X.shape}, expected ({times.shape[0]}, d_phi)"
        )
    Z = rho_truncate(Z_raw, mu)
    return DesignMatrices(X=X, Y=resp, Z=Z, times=times, window_span=span)
