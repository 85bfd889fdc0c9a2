"""Statistical DNS/TCP feature extraction, PADASYN balancing and SAMME boosting
for classifying APT command-and-control traffic."""

__version__ = "0.1.0"
