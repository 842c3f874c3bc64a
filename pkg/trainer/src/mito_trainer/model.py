"""Residual-encoder U-Net.

Two swappable encoders behind one decoder: a torchvision ResNet-34 trunk
(adapted to single-channel input) and a lighter hand-rolled residual
encoder for quick runs. Both downsample by 32x, so input dimensions must
be multiples of 32; the decoder restores full resolution with nearest
upsampling plus convolutions, and skip connections at every scale.
"""

import torch
from torch import nn
from torch.nn import functional as F


def _conv_block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class _BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1,
                               bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.skip = None
        if stride != 1 or c_in != c_out:
            self.skip = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out))

    def forward(self, x):
        identity = x if self.skip is None else self.skip(x)
        out = F.relu(self.bn1(self.conv1(x)), inplace=True)
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity, inplace=True)


def _stage(c_in: int, c_out: int, stride: int) -> nn.Sequential:
    return nn.Sequential(_BasicBlock(c_in, c_out, stride),
                         _BasicBlock(c_out, c_out))


class _SmallEncoder(nn.Module):
    """Five taps at /2 .. /32 with channels base * (1, 2, 4, 8, 16)."""

    def __init__(self, base: int = 16):
        super().__init__()
        c = [base, 2 * base, 4 * base, 8 * base, 16 * base]
        self.channels = c
        self.stem = nn.Sequential(
            nn.Conv2d(1, c[0], 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c[0]), nn.ReLU(inplace=True))
        self.stage1 = _stage(c[0], c[1], 2)
        self.stage2 = _stage(c[1], c[2], 2)
        self.stage3 = _stage(c[2], c[3], 2)
        self.stage4 = _stage(c[3], c[4], 2)

    def forward(self, x):
        f0 = self.stem(x)
        f1 = self.stage1(f0)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        f4 = self.stage4(f3)
        return [f0, f1, f2, f3, f4]


class _ResNet34Encoder(nn.Module):
    """torchvision ResNet-34 trunk with a single-channel stem."""

    def __init__(self):
        super().__init__()
        from torchvision.models import resnet34

        net = resnet34(weights=None)
        self.channels = [64, 64, 128, 256, 512]
        self.stem = nn.Sequential(
            nn.Conv2d(1, 64, 7, stride=2, padding=3, bias=False),
            net.bn1, net.relu)
        self.pool = net.maxpool
        self.layer1 = net.layer1
        self.layer2 = net.layer2
        self.layer3 = net.layer3
        self.layer4 = net.layer4

    def forward(self, x):
        f0 = self.stem(x)                 # /2
        f1 = self.layer1(self.pool(f0))   # /4
        f2 = self.layer2(f1)              # /8
        f3 = self.layer3(f2)              # /16
        f4 = self.layer4(f3)              # /32
        return [f0, f1, f2, f3, f4]


class ResUNet(nn.Module):
    def __init__(self, classes: int = 2, backbone: str = "resnet34",
                 base: int = 16):
        super().__init__()
        if classes not in (2, 3):
            raise ValueError("classes must be 2 or 3")
        if backbone == "resnet34":
            self.encoder = _ResNet34Encoder()
        elif backbone == "small":
            self.encoder = _SmallEncoder(base)
        else:
            raise ValueError("backbone must be resnet34 or small")
        self.classes = classes
        self.backbone = backbone
        c = self.encoder.channels
        self.dec3 = _conv_block(c[4] + c[3], c[3])
        self.dec2 = _conv_block(c[3] + c[2], c[2])
        self.dec1 = _conv_block(c[2] + c[1], c[1])
        self.dec0 = _conv_block(c[1] + c[0], c[0])
        self.final = _conv_block(c[0], c[0])
        self.head = nn.Conv2d(c[0], classes, 1)

    @staticmethod
    def _merge(x, skip):
        x = F.interpolate(x, size=skip.shape[-2:], mode="nearest")
        return torch.cat([x, skip], dim=1)

    def forward(self, x):
        h, w = x.shape[-2:]
        if h % 32 or w % 32:
            raise ValueError(f"image dimensions must be multiples of 32, "
                             f"got {h}x{w}")
        f0, f1, f2, f3, f4 = self.encoder(x)
        d = self.dec3(self._merge(f4, f3))
        d = self.dec2(self._merge(d, f2))
        d = self.dec1(self._merge(d, f1))
        d = self.dec0(self._merge(d, f0))
        d = F.interpolate(d, size=(h, w), mode="nearest")
        return self.head(self.final(d))
