__title__ = "large-margin-softmax"
__version__ = "0.1a1"
