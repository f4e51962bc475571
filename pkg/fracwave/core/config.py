from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    threads: Optional[int] = None
    log_level: str = "INFO"
    output_dir: str = "results"

    model_config = SettingsConfigDict(
        env_prefix="FRACWAVE_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
