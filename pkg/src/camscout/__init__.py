"""camscout: find live network cameras on the web and archive their snapshots."""

__version__ = "0.1.0"
