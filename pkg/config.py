from pydantic_settings import BaseSettings
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"  # DEBUG, INFO, WARNING, ERROR
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Runtime
    ENVIRONMENT: str = "production"  # development, production
    DEFAULT_THREADS: int = 1  # used when --threads is not given

    class Config:
        env_file = ".env"
        case_sensitive = True

settings = Settings()
