class ExtractionError(Exception):
    """Bad job configuration, dataset, or checkpoint."""
