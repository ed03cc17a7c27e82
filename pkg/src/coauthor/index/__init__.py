from .flat import FlatIndex, SearchHit, build_flat
from .ivf_sq8 import IvfSq8Index, build_ivfsq8, default_nlist, default_nprobe, encode_sq8, kmeans
from .storage import load_index, save_index

__all__ = [
    "FlatIndex",
    "IvfSq8Index",
    "SearchHit",
    "build_flat",
    "build_ivfsq8",
    "default_nlist",
    "default_nprobe",
    "encode_sq8",
    "kmeans",
    "load_index",
    "save_index",
]
