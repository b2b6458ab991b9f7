from typing import Literal

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Numerics
    jet_order: int = 6
    tolerance: float = 1e-6
    seed: int = 0
    sample_points: int = 5
    max_workers: int = 1

    # Reports
    report_format: Literal["json", "csv"] = "json"

    # Logging
    log_level: str = "INFO"

    # API Settings
    host: str = "0.0.0.0"
    port: int = 8000
    debug: bool = False
    service_name: str = "GJMS Verification Service"
    version: str = "0.1.0"

    class Config:
        env_file = ".env"
        env_prefix = "GJMS_"
        case_sensitive = False


settings = Settings()
