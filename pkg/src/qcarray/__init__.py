"""Queryable compressed storage for integer multidimensional arrays."""

from .container import ContainerFormatError, ContainerHandle, open_container, write_container
from .geometry import ArraySchema, Region, make_schema
from .pipeline import compress_array, compress_to, decompress_array, encode_array

__all__ = [
    "ArraySchema",
    "ContainerFormatError",
    "ContainerHandle",
    "Region",
    "compress_array",
    "compress_to",
    "decompress_array",
    "encode_array",
    "make_schema",
    "open_container",
    "write_container",
]
__version__ = "0.1.0"
