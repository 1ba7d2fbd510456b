"""mecor-sae - small area estimation with correlated measurement and sampling errors"""
__version__ = "0.1.0"
