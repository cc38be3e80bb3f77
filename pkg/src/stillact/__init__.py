"""Still-image action recognition from body-part and object detections."""

__version__ = "0.1.0"
