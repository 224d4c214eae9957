from .acceptance import acceptance

__all__ = ["acceptance"]
