"""
ctxrep Configuration
Centralized settings management using Pydantic
"""

from functools import lru_cache
from pathlib import Path
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (prefix CTXREP_)"""

    # Encoder
    dimension: int = 128
    token_budget: int = 512  # mirrors the 512-token limit of transformer encoders
    seed: int = 7

    # Training
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 32

    # Clone labels from judgment weights
    weight_high: float = 1.0
    weight_medium: float = 0.66
    weight_low: float = 0.33
    label_threshold: float = 0.5

    # Mining
    mine_workers: int = 1

    # Output
    output_root: str = "runs"
    log_level: str = "INFO"

    @property
    def output_root_path(self) -> Path:
        return Path(self.output_root)

    @property
    def label_weights(self) -> tuple:
        """(high, medium, low) weights for judgment scoring"""
        return (self.weight_high, self.weight_medium, self.weight_low)

    class Config:
        env_prefix = "CTXREP_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
