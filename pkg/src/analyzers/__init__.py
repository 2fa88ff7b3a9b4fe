from .model_count_analyzer import *
from .oracle_analyzer import *
