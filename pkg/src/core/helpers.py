import logging

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_log_level = logging.INFO

def setup_logger(name: str, log_level: int = None) -> logging.Logger:
    '''
    Return the named component logger, attaching a stream handler once.

    Args:
        name: Component name ('Trainer', 'ExperimentRunner', ...).
        log_level: Level to apply; defaults to the process-wide level.

    Returns:
        The configured logger.
    '''
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
    logger.setLevel(log_level if log_level is not None else _log_level)
    return logger

def set_log_level(log_level: int):
    '''
    Change the level of every component logger created so far and of later ones.
    '''
    global _log_level
    _log_level = log_level
    for name, logger in logging.Logger.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and logger.handlers:
            logger.setLevel(log_level)

def init_worker(log_level: int):
    # Process-pool initializer: workers start with fresh logging state.
    set_log_level(log_level)
