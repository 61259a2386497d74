"""Anonymous broadcast, veto, notification, collision detection and private
message transmission over pairwise one-time-pad keys."""

__version__ = "0.1.0"
