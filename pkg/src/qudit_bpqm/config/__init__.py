from .config import load_config, Config, THREADS_ENV_VAR
