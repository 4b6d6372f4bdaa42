"""Constant-velocity Kalman filter over (cx, cy, aspect, height) box states."""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from app.exceptions import DegenerateStateError, InvalidBoxError
from app.models.geometry import BoundingBox

logger = logging.getLogger("app.utils.kalman_filter")

NDIM = 4
GATING_JITTER = 1e-9

# aspect ratio noise does not scale with height
ASPECT_STD = 1e-2
ASPECT_VELOCITY_STD = 1e-5
ASPECT_MEASUREMENT_STD = 1e-1


@dataclass(frozen=True)
class KalmanState:
    """Mean [cx, cy, a, h, vcx, vcy, va, vh] and its 8x8 covariance."""

    mean: np.ndarray
    covariance: np.ndarray


class KalmanFilter:
    """
    Pure-function Kalman filter: every operation takes a state and returns a new one.

    Process and measurement noise standard deviations are proportional to the box
    height. ``process_noise_scale`` and ``measurement_noise_scale`` multiply Q and R;
    setting either to 0 removes that noise source.
    """

    def __init__(
        self,
        std_weight_position: float = 1.0 / 20,
        std_weight_velocity: float = 1.0 / 160,
        process_noise_scale: float = 1.0,
        measurement_noise_scale: float = 1.0,
    ):
        self.std_weight_position = std_weight_position
        self.std_weight_velocity = std_weight_velocity
        self.process_noise_scale = process_noise_scale
        self.measurement_noise_scale = measurement_noise_scale

        self.motion_mat = np.eye(2 * NDIM)
        for i in range(NDIM):
            self.motion_mat[i, NDIM + i] = 1.0
        self.update_mat = np.eye(NDIM, 2 * NDIM)

    def initiate(self, box: BoundingBox) -> KalmanState:
        if not isinstance(box, BoundingBox):
            raise InvalidBoxError(f"expected a BoundingBox, got {type(box).__name__}")
        measurement = box.to_xyah()
        h = measurement[3]
        mean = np.r_[measurement, np.zeros(NDIM)]
        std = [
            2 * self.std_weight_position * h,
            2 * self.std_weight_position * h,
            ASPECT_STD,
            2 * self.std_weight_position * h,
            10 * self.std_weight_velocity * h,
            10 * self.std_weight_velocity * h,
            ASPECT_VELOCITY_STD,
            10 * self.std_weight_velocity * h,
        ]
        return KalmanState(mean, np.diag(np.square(std)))

    def _process_noise(self, h: float) -> np.ndarray:
        std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            ASPECT_STD,
            self.std_weight_position * h,
            self.std_weight_velocity * h,
            self.std_weight_velocity * h,
            ASPECT_VELOCITY_STD,
            self.std_weight_velocity * h,
        ]
        return self.process_noise_scale * np.diag(np.square(std))

    def _measurement_noise(self, h: float) -> np.ndarray:
        std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            ASPECT_MEASUREMENT_STD,
            self.std_weight_position * h,
        ]
        return self.measurement_noise_scale * np.diag(np.square(std))

    def predict(self, state: KalmanState) -> KalmanState:
        mean = np.dot(state.mean, self.motion_mat.T)
        covariance = np.linalg.multi_dot((self.motion_mat, state.covariance, self.motion_mat.T))
        covariance = covariance + self._process_noise(abs(state.mean[3]))
        return KalmanState(mean, covariance)

    def project(self, state: KalmanState) -> Tuple[np.ndarray, np.ndarray]:
        """Measurement-space mean and innovation covariance of a state."""
        mean = np.dot(self.update_mat, state.mean)
        covariance = np.linalg.multi_dot((self.update_mat, state.covariance, self.update_mat.T))
        return mean, covariance + self._measurement_noise(abs(state.mean[3]))

    def update(self, state: KalmanState, box: BoundingBox) -> KalmanState:
        if not isinstance(box, BoundingBox):
            raise InvalidBoxError(f"expected a BoundingBox, got {type(box).__name__}")
        measurement = box.to_xyah()
        projected_mean, projected_cov = self.project(state)
        try:
            chol_factor, lower = scipy.linalg.cho_factor(projected_cov, lower=True, check_finite=False)
        except np.linalg.LinAlgError as e:
            raise DegenerateStateError(f"innovation covariance is not positive definite: {e}") from e
        kalman_gain = scipy.linalg.cho_solve(
            (chol_factor, lower), np.dot(state.covariance, self.update_mat.T).T, check_finite=False
        ).T
        innovation = measurement - projected_mean
        new_mean = state.mean + np.dot(innovation, kalman_gain.T)

        # Joseph form, symmetrised
        i_kh = np.eye(2 * NDIM) - np.dot(kalman_gain, self.update_mat)
        noise = self._measurement_noise(abs(state.mean[3]))
        new_cov = np.linalg.multi_dot((i_kh, state.covariance, i_kh.T)) + np.linalg.multi_dot(
            (kalman_gain, noise, kalman_gain.T)
        )
        new_cov = 0.5 * (new_cov + new_cov.T)
        return KalmanState(new_mean, new_cov)

    def gating_distance(self, state: KalmanState, boxes: Sequence[BoundingBox]) -> np.ndarray:
        """Squared Mahalanobis distance of each box under the projected state distribution."""
        if not boxes:
            return np.zeros(0, dtype=np.float64)
        mean, covariance = self.project(state)
        covariance = covariance + GATING_JITTER * np.eye(NDIM)
        measurements = np.array([b.to_xyah() for b in boxes], dtype=np.float64)
        try:
            cholesky_factor = np.linalg.cholesky(covariance)
        except np.linalg.LinAlgError as e:
            raise DegenerateStateError(f"projected covariance is singular: {e}") from e
        d = measurements - mean
        z = scipy.linalg.solve_triangular(cholesky_factor, d.T, lower=True, check_finite=False, overwrite_b=True)
        return np.maximum(0.0, np.sum(z * z, axis=0))


def predicted_center(state: KalmanState) -> Tuple[float, float]:
    return float(state.mean[0]), float(state.mean[1])


def predicted_box(state: KalmanState) -> BoundingBox:
    """Convert the (cx, cy, a, h) part of the mean back to top-left form."""
    cx, cy, a, h = (float(v) for v in state.mean[:4])
    if not h > 0:
        raise DegenerateStateError(f"state height {h!r} is not positive")
    try:
        return BoundingBox.from_xyah(cx, cy, a, h)
    except InvalidBoxError as e:
        raise DegenerateStateError(f"state does not describe a valid box: {e}") from e
