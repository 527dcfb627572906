from dataclasses import dataclass

from vinp.errors import ContractError

KERNEL = 5
STRIDE = 2
PAD = 2


@dataclass(frozen=True)
class EDGanConfig:
    """Shape of the volumetric encoder-decoder and its discriminator.

    Attributes:
        d_l: Cubic input resolution, a multiple of 8.
        channels: Widths of the three encoder convolutions; the decoder mirrors them.
    """
    d_l: int = 16
    channels: tuple[int, int, int] = (8, 16, 32)
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.d_l < 8 or self.d_l % 8 != 0:
            raise ContractError("EDGanConfig", f"d_l must be a positive multiple of 8, got {self.d_l}")
        if len(self.channels) != 3 or min(self.channels) < 1:
            raise ContractError("EDGanConfig", f"expected 3 positive channel widths, got {self.channels}")

    @property
    def latent_extent(self) -> int:
        return self.d_l // 8

    @property
    def latent_dim(self) -> int:
        return self.latent_extent ** 3 * self.channels[2]


@dataclass(frozen=True)
class LrcnConfig:
    """Shape of the slice-recurrent upsampler.

    Attributes:
        d_l: Low resolution of the volumes fed in.
        d_h: Output resolution; a multiple of both 4 and d_l.
        c: Slices per step, odd.
        channels: Widths of the three 3D encoder convolutions.
        feature_dim: Width of the per-step encoding fed to the LSTM.
        hidden_dim: LSTM state width.
        seed_channels: Channels of the (d_h/4)^2 map the decoder starts from.
        mid_channels: Channels between the two decoder deconvolutions.
    """
    d_l: int = 16
    d_h: int = 64
    c: int = 5
    channels: tuple[int, int, int] = (8, 16, 32)
    feature_dim: int = 200
    hidden_dim: int = 200
    seed_channels: int = 8
    mid_channels: int = 4
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.d_l < 8 or self.d_l % 8 != 0:
            raise ContractError("LrcnConfig", f"d_l must be a positive multiple of 8, got {self.d_l}")
        if self.d_h % 4 != 0 or self.d_h % self.d_l != 0:
            raise ContractError("LrcnConfig", f"d_h={self.d_h} must be a multiple of 4 and of d_l={self.d_l}")
        if self.c < 1 or self.c % 2 == 0:
            raise ContractError("LrcnConfig", f"c must be odd and positive, got {self.c}")
        if len(self.channels) != 3 or min(self.channels) < 1:
            raise ContractError("LrcnConfig", f"expected 3 positive channel widths, got {self.channels}")
        if min(self.feature_dim, self.hidden_dim, self.seed_channels, self.mid_channels) < 1:
            raise ContractError("LrcnConfig", "widths must be positive")

    @property
    def factor(self) -> int:
        return self.d_h // self.d_l

    @property
    def seed_extent(self) -> int:
        return self.d_h // 4

    @property
    def encoded_dim(self) -> int:
        thick = self.c
        for _ in range(3):
            thick = (thick + 1) // 2
        return (self.d_l // 8) ** 2 * thick * self.channels[2]


def desk_configs() -> tuple[EDGanConfig, LrcnConfig]:
    return EDGanConfig(16, (8, 16, 32)), LrcnConfig(16, 64, 5, (8, 16, 32), 200, 200, 8, 4)


def full_configs() -> tuple[EDGanConfig, LrcnConfig]:
    return EDGanConfig(32, (64, 128, 256)), LrcnConfig(32, 128, 5, (64, 128, 256), 200, 200, 32, 16)


def arch_table(edgan: EDGanConfig, lrcn: LrcnConfig) -> dict[str, str]:
    """Architecture keys stored next to checkpoints."""
    return {
        "d_l": str(edgan.d_l),
        "d_h": str(lrcn.d_h),
        "c": str(lrcn.c),
        "channels": ",".join(map(str, edgan.channels)),
        "lrcn_channels": ",".join(map(str, lrcn.channels)),
        "feature_dim": str(lrcn.feature_dim),
        "hidden_dim": str(lrcn.hidden_dim),
        "seed_channels": str(lrcn.seed_channels),
        "mid_channels": str(lrcn.mid_channels),
        "bn_momentum": repr(edgan.bn_momentum),
        "bn_eps": repr(edgan.bn_eps),
    }


def configs_from_table(table: dict[str, str]) -> tuple[EDGanConfig, LrcnConfig]:
    try:
        d_l = int(table["d_l"])
        momentum = float(table.get("bn_momentum", 0.1))
        eps = float(table.get("bn_eps", 1e-5))
        edgan = EDGanConfig(d_l, tuple(int(v) for v in table["channels"].split(",")), momentum, eps)
        lrcn = LrcnConfig(
            d_l=d_l,
            d_h=int(table["d_h"]),
            c=int(table["c"]),
            channels=tuple(int(v) for v in table["lrcn_channels"].split(",")),
            feature_dim=int(table["feature_dim"]),
            hidden_dim=int(table["hidden_dim"]),
            seed_channels=int(table["seed_channels"]),
            mid_channels=int(table["mid_channels"]),
            bn_momentum=momentum,
            bn_eps=eps,
        )
    except (KeyError, ValueError) as e:
        raise ContractError("configs_from_table", f"bad architecture table: {e}")
    return edgan, lrcn
