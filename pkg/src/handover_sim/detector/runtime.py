"""Online release decisions from streaming force readings.

ReleaseMonitor keeps the newest window of readings in a ring buffer and runs
the classifier over it; the gripper opens once the open-class score clears
the threshold for a required number of consecutive inferences. The ring also
caches the per-row input projections of the LSTM so each inference only pays
for the recurrence.

ThresholdReleaseMonitor is the classical baseline: calibrate the object
weight from the initial hold phase, then open once the measured load stays
below a fixed fraction of it for a sustained stretch.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as _sigmoid

from .network import NetworkParams

__all__ = ["ReleaseMonitor", "ThresholdReleaseMonitor", "HOLD", "RELEASE"]

HOLD = "hold"
RELEASE = "release"


class ReleaseMonitor:
    """FIFO buffer plus classifier; decision debounced over consecutive hits."""

    def __init__(
        self,
        net: NetworkParams,
        window: int = 500,
        threshold_prob: float = 0.5,
        consecutive_required: int = 5,
    ):
        if window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < threshold_prob < 1.0:
            raise ValueError("threshold_prob must lie in (0, 1)")
        if consecutive_required < 1:
            raise ValueError("consecutive_required must be >= 1")
        self.net = net
        self.window = window
        self.threshold_prob = threshold_prob
        self.consecutive_required = consecutive_required
        self._hidden = net.hidden
        self._features = net.input_size
        # Split the fused LSTM matrix once; ring caches bias + input projections.
        self._bias = net.W_lstm[0]
        self._W_x = net.W_lstm[1 : 1 + self._features]
        self._W_h = net.W_lstm[1 + self._features :]
        self._proj = np.zeros((window, 4 * self._hidden))
        self._raw = np.zeros((window, self._features))
        self._count = 0
        self._pos = 0
        self._streak = 0
        self._released = False
        self.last_probability = 0.0

    def __len__(self) -> int:
        return min(self._count, self.window)

    def push(self, reading: np.ndarray) -> None:
        """Append one reading, evicting the oldest beyond the window."""
        reading = np.asarray(reading, dtype=float).reshape(self._features)
        self._raw[self._pos] = reading
        self._proj[self._pos] = self._bias + reading @ self._W_x
        self._pos = (self._pos + 1) % self.window
        self._count += 1

    def _ordered_proj(self) -> np.ndarray:
        if self._count < self.window or self._pos == 0:
            return self._proj
        return np.concatenate([self._proj[self._pos :], self._proj[: self._pos]])

    def window_contents(self) -> np.ndarray:
        """Current window, oldest row first (only valid when full)."""
        if self._pos == 0 or self._count < self.window:
            return self._raw.copy()
        return np.concatenate([self._raw[self._pos :], self._raw[: self._pos]])

    def infer(self) -> float:
        """Open-class score for the current buffer (requires a full window)."""
        H = self._hidden
        h = np.zeros(H)
        c = np.zeros(H)
        for row in self._ordered_proj():
            A = row + h @ self._W_h
            g = np.tanh(A[:H])
            ifo = _sigmoid(A[H:])
            c = ifo[:H] * g + ifo[H : 2 * H] * c
            h = ifo[2 * H :] * np.tanh(c)
        a1 = np.maximum(h @ self.net.W1 + self.net.b1, 0.0)
        a2 = np.maximum(a1 @ self.net.W2 + self.net.b2, 0.0)
        prob = float(_sigmoid(a2 @ self.net.W3 + self.net.b3)[1])
        self.last_probability = prob
        return prob

    def step(self, reading: np.ndarray, infer: bool = True) -> str:
        """Append one reading; optionally run inference and debounce."""
        self.push(reading)
        if self._released:
            return RELEASE
        if not infer or self._count < self.window:
            return HOLD
        if self.infer() >= self.threshold_prob:
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self.consecutive_required:
            self._released = True
            return RELEASE
        return HOLD

    def push_and_infer(self, reading: np.ndarray) -> str:
        """Append one reading and return the debounced decision."""
        return self.step(reading, infer=True)


class ThresholdReleaseMonitor:
    """Force-threshold baseline: open at a sustained drop of the load reading.

    The object weight is calibrated as the mean |Fz| over the first
    calibration_samples readings of the hold phase; release triggers after
    hold_samples consecutive readings with |Fz| <= (1 - theta) * f_L0.
    """

    def __init__(
        self,
        theta: float = 0.8,
        hold_samples: int = 25,
        calibration_samples: int = 250,
    ):
        if not 0.0 < theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if hold_samples < 1:
            raise ValueError("hold_samples must be >= 1")
        if calibration_samples < 1:
            raise ValueError(
                f"calibration window too short: need >= 1 sample, got {calibration_samples}"
            )
        self.theta = theta
        self.hold_samples = hold_samples
        self.calibration_samples = calibration_samples
        self._calib_sum = 0.0
        self._seen = 0
        self.f_L0: float | None = None
        self._streak = 0
        self._released = False

    def push(self, reading: np.ndarray) -> str:
        reading = np.asarray(reading, dtype=float).reshape(-1)
        load = abs(float(reading[2]))
        self._seen += 1
        if self.f_L0 is None:
            self._calib_sum += load
            if self._seen >= self.calibration_samples:
                self.f_L0 = self._calib_sum / self.calibration_samples
            return HOLD
        if self._released:
            return RELEASE
        if load <= (1.0 - self.theta) * self.f_L0:
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self.hold_samples:
            self._released = True
            return RELEASE
        return HOLD
