"""Push, pull, combined and genie caching policies under the Age-of-Version cost model."""

__version__ = "0.1.0"
