"""Sound event recognition: 149-column audio features, preprocessing pipeline and classifier benchmark."""

__version__ = "0.1.0"
