from .commands import CommandHandler, UsageError

__all__ = [
    'CommandHandler',
    'UsageError',
]
