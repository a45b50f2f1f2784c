"""Multi-modal visual prompting for single-modality trackers."""
__version__ = "0.1.0"
