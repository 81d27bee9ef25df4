# -*- coding: utf-8 -*-
"""
radar-eval 版本信息
"""

__version__ = "0.3.0"
__description__ = "按评估条件切片的时间序列预测评估引擎"


def get_version():
    """获取当前版本"""
    return __version__
