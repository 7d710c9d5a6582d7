"""Hopping-leg surface workbench.

Simulate a 3-DOF leg hopping on compliant ground, synthesize IMU traces,
classify the surface with a scaler -> PCA -> bidirectional GRU pipeline,
and calibrate surface parameters against reference traces.
"""
__version__ = "0.1.0"

from .calibration import (CalibrationResult, TraceComparison, calibrate_surface,
                          detect_jump_events, trace_discrepancy)
from .dataset import (Dataset, Episode, Windows, generate_corpus, load_csv, load_dataset,
                      save_csv, save_dataset, split, window_dataset)
from .dynamics import PRESETS, JointCommand, LegState, SurfaceParams, preset, step
from .errors import (AlignmentFailed, ConfigError, DegenerateChannel, IncompatibleModel,
                     InsufficientEpisodes, InvalidCycle, NoEventsFound, NonFiniteLoss,
                     NonMonotonicTime, NumericalBlowup, ParseError, SurfBenchError, Unreachable)
from .evaluation import EvalReport, evaluate
from .gru import GruWeights, gru_cell
from .imu import ImuSample, ImuTrace, NoiseSpec
from .kinematics import (JumpCycle, LegModel, forward_kinematics, inverse_kinematics, jacobian,
                         plan_jump_trajectory)
from .model import PipelineModel, classify_batch, classify_window, load_model, save_model
from .pipeline import PipelineConfig, fit_pipeline
from .preprocessing import fit_pca, fit_scaler
from .simulation import simulate, simulate_episode
from .streaming import stream_classify
from .training import TrainConfig, train
