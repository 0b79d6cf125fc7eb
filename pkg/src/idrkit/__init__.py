"""Toolkit for mining implicit discourse relations from parallel subtitle
corpora and for multimodal (text + speech) relation classification."""

__version__ = "0.1.0"
