"""Process settings, read from the environment (and .env) once at import."""
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv
load_dotenv(override=True)


@dataclass
class Settings:
    """Defaults for every CLI flag."""

    # Reproducibility / parallelism
    seed: int = 20210917
    threads: int = 1

    # Outputs
    output_dir: Path = field(default_factory=lambda: Path("output"))
    log_level: str = "INFO"

    # Estimation
    method: str = "mecor"
    jk_scale: str = "plain"           # plain (alias paper) / classic
    max_jk_failure_rate: float = 0.05

    # Simulation
    mc_reps: int = 1000
    max_sim_failure_rate: float = 0.01

    @classmethod
    def from_env(cls) -> "Settings":
        """Load settings from SAE_* environment variables."""
        return cls(
            seed=int(os.getenv("SAE_SEED", "20210917")),
            threads=max(1, int(os.getenv("SAE_THREADS", "1"))),

            output_dir=Path(os.getenv("SAE_OUTPUT_DIR", "output")),
            log_level=os.getenv("SAE_LOG_LEVEL", "INFO").upper(),

            method=os.getenv("SAE_METHOD", "mecor").lower(),
            jk_scale=os.getenv("SAE_JK_SCALE", "plain").lower(),
            max_jk_failure_rate=float(os.getenv("SAE_MAX_JK_FAILURE_RATE", "0.05")),

            mc_reps=int(os.getenv("SAE_MC_REPS", "1000")),
            max_sim_failure_rate=float(os.getenv("SAE_MAX_SIM_FAILURE_RATE", "0.01")),
        )


# Global settings instance
settings = Settings.from_env()
