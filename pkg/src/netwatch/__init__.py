"""netwatch: self-hosted multi-agent network monitoring assistant.

Per-database telemetry stores, windowed anomaly detection and forecasting,
one scoped reasoning agent per database, cross-agent fault localization,
and a chat gateway backed by a pluggable locally hosted language model.
"""

__version__ = "0.1.0"
