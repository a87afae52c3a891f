"""Wide-range head pose: wrapped losses, bin decoding, dome auto-labeling and a toy trainer."""

from .angles import EulerPose, awe, euler_to_matrix, mawe, matrix_to_euler, normalize_pose, wrap_angle
from .losses import PITCH_BINS, ROLL_BINS, YAW_BINS, BinConfig, LossWeights, combined_loss, decode_expectation, wrapped_loss
from .metrics import MetricsReport, compute_report
from .rigid import RigidTransform, fit_rigid

__version__ = "0.1.0"
