from .metrics_visualizer import MetricsVisualizer
from .sweep_visualizer import SweepVisualizer
from .count_visualizer import CountVisualizer
