from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"

    # Embedding grid / detections
    GRID_STRIDE: int = 4
    EMB_DIM: int = 128
    DETECTION_SIG_DIGITS: int = 6

    # Result files
    RESULT_DECIMALS: int = 2
    SCORE_DECIMALS: int = 4
    INTERP_MAX_GAP: int = 20

    # Evaluation
    EVAL_IOU_THRESHOLD: float = 0.5
    EVAL_MIN_VISIBILITY: float = 0.0

    # Cost-matrix benchmark
    BENCH_ITERATIONS: int = 101
    BENCH_WARMUP: int = 10

    MAX_UPLOAD_MB: int = 50
    DEFAULT_JOBS: int = 1

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()
