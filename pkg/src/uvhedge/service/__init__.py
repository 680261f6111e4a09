from .schemas import ExperimentConfig, Report
from .app import app, create_app

__all__ = ["ExperimentConfig", "Report", "app", "create_app"]
