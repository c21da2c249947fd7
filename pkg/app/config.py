import math
import os

from pydantic_settings import BaseSettings

# Load environment variables from .env file
from dotenv import dotenv_values


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables or .env file.
    Holds the enumeration budgets, size limits and numerical tolerances
    shared by the physics modules.
    """

    # App settings
    APP_NAME: str = "MatrixMemoryLab"
    APP_DESCRIPTION: str = (
        "MatrixMemoryLab simulates large-N matrix-model quantum memories: "
        "exact trace correlators, approximate Knill-Laflamme checks and "
        "Lindblad memory-time scaling."
    )
    VERSION: str = "0.3.0"
    ENV: str = "dev"

    # Contraction engine
    ENUMERATION_BUDGET: int = 100_000_000
    CONTRACTION_CACHE_SIZE: int = 2_000_000
    WORKERS: int = 1

    # Size limits
    FOCK_DIMENSION_LIMIT: int = 20_000_000
    BASIS_SIZE_LIMIT: int = 5_000
    SPIN_SECTOR_LIMIT: int = 1_000_000
    SPIN_QUANTA_BUDGET: int = 8

    # Numerics
    SERIES_ORDER: int = 4
    CLASS_TOLERANCE: float = 1e-9
    GRAM_FLOOR: float = 1e-10
    EIGENVALUE_FLOOR: float = 1e-14

    # Output
    OUTPUT_DIR: str = "output"
    LOG_FILE: str = "logs/app.log"
    WRITE_MANIFEST: bool = True

    def __init__(self, **values):
        super().__init__(**values)
        # Load environment variables from .env file
        env_file = (
            ".env.test" if "PYTEST_CURRENT_TEST" in os.environ else ".env"
        )
        try:
            config = dotenv_values(env_file)
            # Override defaults with values from .env file
            for key, value in config.items():
                if hasattr(self, key) and value is not None:
                    current = getattr(self, key)
                    if isinstance(current, bool):
                        object.__setattr__(
                            self,
                            key,
                            value.lower() in ("true", "1", "yes", "on"),
                        )
                    elif isinstance(current, int):
                        object.__setattr__(self, key, int(value))
                    elif isinstance(current, float):
                        object.__setattr__(self, key, float(value))
                    else:
                        object.__setattr__(self, key, value)
        except FileNotFoundError:
            # .env file doesn't exist, use defaults
            pass

    @property
    def DEFAULT_DELTA(self) -> float:
        """
        Default mutual-information drop defining the memory time, for a qubit.
        """
        return 0.1 * 2 * math.log(2)

    @property
    def CRITICAL_TEMPERATURE_RATIO(self) -> float:
        """
        Hagedorn temperature of a 2^n degeneracy in units of omega.
        """
        return 1 / math.log(2)


settings = Settings()
