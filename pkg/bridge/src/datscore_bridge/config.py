"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class BridgeConfig:
    """One served model and the knobs bounding its work.

    `model` is a checkpoint path or hub identifier; it must be a
    seq2seq model usable for forced scoring with a full per-step
    distribution (checked at load time). `queue_size` bounds the
    number of in-flight work items; requests that would exceed it are
    rejected rather than buffered without limit.
    """

    model: str
    device: str = "cpu"
    max_batch: int = 8
    port: int = 8000
    host: str = "127.0.0.1"
    queue_size: int = 64
    max_new_tokens: int = 128

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model identifier is empty")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.queue_size < self.max_batch:
            raise ValueError("queue_size must be >= max_batch")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
