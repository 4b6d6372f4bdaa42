from .bench import BenchReport
from .metrics import MetricsReport
from .synth import OcclusionWindow, PresetInfo, ScenarioSpec, ScoreModel, TargetSpec
from .tracking import RunManifest, Similarity, Strategy, TrackerConfig

__all__ = [
    "BenchReport",
    "MetricsReport",
    "OcclusionWindow",
    "PresetInfo",
    "ScenarioSpec",
    "ScoreModel",
    "TargetSpec",
    "RunManifest",
    "Similarity",
    "Strategy",
    "TrackerConfig",
]
