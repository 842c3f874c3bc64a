"""Training configuration."""

from dataclasses import asdict, dataclass


@dataclass
class TrainConfig:
    dataset_dir: str
    out_dir: str
    classes: int = 2                 # 2 (binary) or 3 (with overlap class)
    epochs: int = 40
    batch_size: int = 8
    crop: int = 128                  # training crop size, px; no resizing ever
    lr: float = 1e-3
    lr_factor: float = 0.5           # reduce-on-plateau multiplier
    lr_patience: int = 3             # epochs of val-loss plateau before reduction
    early_stop_patience: int = 8     # epochs without val-loss improvement
    flip: bool = True                # augmentation toggles
    rotate: bool = True              # 90-degree rotations only
    random_crop: bool = True         # False trains on full images
    val_max: int = 0                 # cap on validation images; 0 = all
    backbone: str = "resnet34"       # resnet34 | small
    seed: int = 0

    def validate(self) -> None:
        if self.classes not in (2, 3):
            raise ValueError("classes must be 2 or 3")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.crop < 32 or self.crop % 32:
            raise ValueError("crop must be a positive multiple of 32")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.lr_factor < 1:
            raise ValueError("lr_factor must be in (0, 1)")
        if self.lr_patience < 0 or self.early_stop_patience < 0:
            raise ValueError("patience values must be non-negative")
        if self.val_max < 0:
            raise ValueError("val_max must be non-negative")
        if self.backbone not in ("resnet34", "small"):
            raise ValueError("backbone must be resnet34 or small")

    def to_dict(self) -> dict:
        return asdict(self)
