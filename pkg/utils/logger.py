# -*- coding: utf-8 -*-
"""
日志工具

所有模块的记录器都挂在 ``radar_eval`` 之下，运行清单的警告收集器也挂在这里。
"""

import logging
import os
import sys
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler
from typing import Optional

ROOT_LOGGER_NAME = "radar_eval"

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# 终端配色与级别标记
LEVEL_STYLES = {
    "DEBUG": ("\033[90m", "[D]"),
    "INFO": ("\033[94m", "[I]"),
    "WARNING": ("\033[93m", "[W]"),
    "ERROR": ("\033[91m", "[E]"),
    "CRITICAL": ("\033[97m\033[41m", "[C]"),
}
RESET = "\033[0m"


class ColorFormatter(logging.Formatter):
    """终端彩色格式化器"""

    def format(self, record: logging.LogRecord) -> str:
        color, icon = LEVEL_STYLES.get(record.levelname, (RESET, ""))
        levelname = record.levelname
        record.levelname = f"{icon}{levelname}"
        try:
            message = super().format(record)
        finally:
            record.levelname = levelname
        return f"{color}{message}{RESET}"


def generate_log_path(base_dir: str = "logs") -> str:
    """
    生成按日期归档的日志文件路径
    格式: <base_dir>/yyyymmdd/runlog-yyyymmddhhmmss.log
    """
    now = datetime.now()
    return os.path.join(base_dir, now.strftime("%Y%m%d"), f"runlog-{now.strftime('%Y%m%d%H%M%S')}.log")


def setup_logger(log_level: int = logging.INFO,
                 log_file: Optional[str] = None,
                 console: bool = True,
                 retention_days: int = 30) -> logging.Logger:
    """
    配置 radar_eval 根记录器

    记录器本身至少放行 WARNING，输出级别由各处理器控制，
    因此 ``--log-level ERROR`` 时警告仍会进入运行清单。

    Args:
        log_level: 处理器输出级别
        log_file: 日志文件路径，为空时不写文件
        console: 是否输出到 stderr
        retention_days: 按天轮转的日志保留份数

    Returns:
        logging.Logger: 根记录器
    """
    logger = logging.getLogger(ROOT_LOGGER_NAME)
    logger.setLevel(min(log_level, logging.WARNING))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    plain = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = TimedRotatingFileHandler(log_file,
                                                when="midnight",
                                                backupCount=retention_days,
                                                encoding="utf-8")
        file_handler.setFormatter(plain)
        file_handler.setLevel(log_level)
        logger.addHandler(file_handler)

    if console:
        # stdout 留给命令的机器可读输出
        console_handler = logging.StreamHandler(sys.stderr)
        if getattr(sys.stderr, "isatty", lambda: False)():
            console_handler.setFormatter(ColorFormatter(LOG_FORMAT, datefmt=DATE_FORMAT))
        else:
            console_handler.setFormatter(plain)
        console_handler.setLevel(log_level)
        logger.addHandler(console_handler)

    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """获取 radar_eval 下的子记录器"""
    if name:
        return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
    return logging.getLogger(ROOT_LOGGER_NAME)


def log_exception(logger: logging.Logger,
                  e: BaseException,
                  context: str = "") -> None:
    """
    记录异常信息，堆栈只在 DEBUG 级别输出

    Args:
        logger: 日志记录器
        e: 异常对象
        context: 上下文信息
    """
    message = getattr(e, "message", None) or str(e) or type(e).__name__
    logger.error(f"{context}: {message}" if context else message)
    logger.debug("异常详情:", exc_info=(type(e), e, e.__traceback__))
