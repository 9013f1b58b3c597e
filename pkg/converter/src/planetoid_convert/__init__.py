from .convert import DATASETS, ConvertError, convert_planetoid

__all__ = ["DATASETS", "ConvertError", "convert_planetoid"]
__version__ = "0.1.0"
