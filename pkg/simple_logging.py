import logging

LOGGER_NAME = "debias"


def get_basic_logger(level: str = "INFO") -> logging.Logger:
    """Builds the shared console logger used across the package

    Args:
        level (str, optional): Name of the logging level. Defaults to "INFO".

    Returns:
        logging.Logger: Configured logger
    """
    # create logger
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    # Handler is attached once, repeated calls only adjust the level
    if logger.handlers:
        return logger

    # Set up format for the logs
    formatter = logging.Formatter(
        "%(levelname)s-%(asctime)s %(filename)s:%(lineno)s -"
        " %(funcName)2s()\n%(message)s \n"
    )

    # Setup Console Handler
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG)
    console_handler.setFormatter(formatter)
    # Add the console handler to the logger object
    logger.addHandler(console_handler)
    logger.propagate = False

    return logger
