"""Video danger assessment: embedding fusion, alert classification and rating regression."""

__version__ = "0.1.0"
