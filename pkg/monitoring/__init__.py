# monitoring/__init__.py
from .logger import LogManager, JSONFormatter, StructuredLoggerAdapter, log_manager
from .metrics_collector import MetricsCollector
from .performance_tracker import PerformanceTracker
from .report_writer import ReportWriter

__all__ = [
    'LogManager',
    'JSONFormatter',
    'StructuredLoggerAdapter',
    'log_manager',
    'MetricsCollector',
    'PerformanceTracker',
    'ReportWriter',
]
