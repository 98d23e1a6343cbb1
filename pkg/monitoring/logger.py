# monitoring/logger.py
import json
import logging
import os
import threading
import traceback
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, Optional

import config

# Record attributes copied into the JSON document when present
CONTEXT_FIELDS = ("run_id", "profile", "variant", "sequence_id", "epoch", "stage", "metrics")


class JSONFormatter(logging.Formatter):
    """Format log records as JSON for better parsing."""

    def __init__(self, **kwargs):
        self.kwargs = kwargs
        super().__init__()

    def format(self, record):
        log_data = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "thread": record.thread,
        }

        for key, value in self.kwargs.items():
            if key not in log_data:
                log_data[key] = value

        for key in CONTEXT_FIELDS:
            if hasattr(record, key):
                log_data[key] = getattr(record, key)

        if record.exc_info:
            log_data['exception'] = {
                'type': record.exc_info[0].__name__,
                'value': str(record.exc_info[1]),
                'traceback': traceback.format_exception(*record.exc_info)
            }

        return json.dumps(log_data, default=str)


class StructuredLoggerAdapter(logging.LoggerAdapter):
    """Logger adapter that adds structured context to log records."""

    def process(self, msg, kwargs):
        extra = kwargs.setdefault('extra', {})
        for key, value in self.extra.items():
            extra.setdefault(key, value)
        return msg, kwargs


class LogManager:
    """Logging configuration plus structured loggers for training, evaluation and benchmarks.

    Nothing touches the filesystem until ``configure`` is called with a log
    directory; without one only the console handler is installed.
    """

    def __init__(self):
        self.log_dir: Optional[str] = None
        self.default_context = {
            "app": config.APP_NAME,
            "environment": config.LOG_CONFIG["environment"],
        }
        self.context = threading.local()

    def configure(self, log_dir: Optional[str] = None, level: Optional[str] = None) -> None:
        """Install console and, with a log directory, rotating JSON file handlers on the root logger."""
        level = getattr(logging, (level or config.LOG_CONFIG["level"]).upper(), logging.INFO)
        root_logger = logging.getLogger()
        root_logger.setLevel(level)

        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()

        console_handler = logging.StreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        root_logger.addHandler(console_handler)

        self.log_dir = log_dir or config.LOG_CONFIG["log_dir"] or None
        if self.log_dir:
            os.makedirs(self.log_dir, exist_ok=True)
            file_formatter = JSONFormatter(**self.default_context)

            file_handler = RotatingFileHandler(
                os.path.join(self.log_dir, f"{config.APP_NAME}.log"), maxBytes=10*1024*1024, backupCount=5
            )
            file_handler.setLevel(level)
            file_handler.setFormatter(file_formatter)
            root_logger.addHandler(file_handler)

            error_handler = RotatingFileHandler(
                os.path.join(self.log_dir, "errors.log"), maxBytes=10*1024*1024, backupCount=5
            )
            error_handler.setLevel(logging.ERROR)
            error_handler.setFormatter(file_formatter)
            root_logger.addHandler(error_handler)

            logging.getLogger(__name__).info(f"Logging to {self.log_dir}")

    def get_logger(self, name: str, **context) -> StructuredLoggerAdapter:
        """
        Get a logger with context information.

        Args:
            name: Logger name
            **context: Additional context to include in logs

        Returns:
            StructuredLoggerAdapter: A logger carrying default, thread and call context
        """
        logger = logging.getLogger(name)
        combined_context = {**self.default_context}
        if hasattr(self.context, 'data'):
            combined_context.update(self.context.data)
        combined_context.update(context)
        return StructuredLoggerAdapter(logger, combined_context)

    def set_context(self, **context) -> None:
        """Set context (run id, profile, ...) for the current thread."""
        if not hasattr(self.context, 'data'):
            self.context.data = {}
        self.context.data.update(context)

    def clear_context(self) -> None:
        if hasattr(self.context, 'data'):
            del self.context.data

    def log_epoch(self, epoch: int, train_loss: float, val_mse: Optional[float],
                  duration_s: float, **metrics: Any) -> None:
        """
        Log the end of a training epoch in a standardized format.

        Args:
            epoch: 1-based epoch number
            train_loss: mean total loss over the epoch's training sequences
            val_mse: validation MSE, or None without a validation set
            duration_s: wall time of the epoch
            **metrics: additional values recorded under "metrics"
        """
        logger = self.get_logger("training.epoch", epoch=epoch)
        data: Dict[str, Any] = {"train_loss": train_loss, "val_mse": val_mse, "duration_s": duration_s, **metrics}
        val_text = f"{val_mse:.5f}" if val_mse is not None else "n/a"
        logger.info(f"Epoch {epoch}: loss {train_loss:.5f}, val MSE {val_text} in {duration_s:.1f}s",
                    extra={"metrics": data})

    def log_stage_timing(self, stage: str, stats: Dict[str, float]) -> None:
        """Log latency statistics of one benchmark stage."""
        logger = self.get_logger("bench.stage", stage=stage)
        logger.info(f"{stage}: mean {stats.get('mean', 0.0):.3f} ms, p99 {stats.get('p99', 0.0):.3f} ms "
                    f"over {stats.get('count', 0)} frames", extra={"metrics": stats})


# Singleton instance
log_manager = LogManager()
