from .run_config import RunConfig, Command, OutputFormat, parse_grid, parse_eigenlist
