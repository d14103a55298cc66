"""Tunable protocol parameters shared by all parties of a network."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ParameterError
from ..mac import FIELDS, key_material_bits
from ..puf import DEFAULT_PARAMS, ExtractorParams


@dataclass(frozen=True)
class EntityAuthPolicy:
    # "inline" derives a fresh PUF key per run, "pooled" uses an l-use pool key
    mode: str = "pooled"
    l: int = 8
    s_bits: int = 64
    w: int = 64
    track_replays: bool = True
    # draw a new pool key once the current one has served l sessions
    rotate: bool = True

    def validate(self) -> None:
        if self.mode not in ("inline", "pooled"):
            raise ParameterError(f"entity auth mode must be inline or pooled, got {self.mode!r}")
        if self.w not in FIELDS:
            raise ParameterError(f"unsupported MAC width {self.w}")
        if not 1 <= self.l <= 256:
            raise ParameterError("entity auth l must be in 1..256")
        if self.s_bits < 1:
            raise ParameterError("s_bits must be positive")


@dataclass(frozen=True)
class ProtocolConfig:
    extractor: ExtractorParams = DEFAULT_PARAMS
    # ITS authentication of key confirmation and QKD post-processing
    its_auth: bool = True
    confirm_w: int = 64
    # comp_mac-protect CHALLENGE and REQ_CONNECT when a computational key exists
    gate_requests: bool = False
    relay_key_bits: int = 256
    relay_w: int = 64
    auth_budget: int = 256
    fresh_bits: int = 4096
    qkd_w: int = 64
    entity: EntityAuthPolicy = field(default_factory=EntityAuthPolicy)

    @property
    def confirm_bits(self) -> int:
        """Key bits spent on confirmation (two single-message pads plus the hash key)."""
        return key_material_bits(self.confirm_w, 2) if self.its_auth else 0

    @property
    def relay_auth_bits(self) -> int:
        return key_material_bits(self.relay_w, 1)

    @property
    def qkd_pads(self) -> int:
        return self.auth_budget // self.qkd_w - 1

    def validate(self) -> None:
        self.extractor.validate()
        self.entity.validate()
        for w in (self.confirm_w, self.relay_w, self.qkd_w):
            if w not in FIELDS:
                raise ParameterError(f"unsupported MAC width {w}")
        if self.its_auth and self.extractor.key_bits <= self.confirm_bits:
            raise ParameterError(
                f"key_bits={self.extractor.key_bits} leaves nothing after {self.confirm_bits} confirmation bits"
            )
        if self.its_auth and self.qkd_pads < 2:
            raise ParameterError(f"auth_budget={self.auth_budget} must hold a hash key and two pads at w={self.qkd_w}")
        if self.relay_key_bits < 1 or self.fresh_bits < 0:
            raise ParameterError("relay_key_bits must be positive and fresh_bits non-negative")
