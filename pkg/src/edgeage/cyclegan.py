"""Edge-to-edge translation: unpaired CycleGAN over colored edge maps.

Domain X holds young edge maps (interior canny RED), domain Y old ones
(GREEN). G maps X to Y, F maps Y to X; PatchGAN discriminators judge each
domain, and an L1 cycle penalty ties the two mappings together.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .edgemap import EdgeMap, edge_map_from_soft, edge_to_array
from .errors import ContractError, NumericError
from .nn import Conv2d, ConvTranspose2d, Dropout, InstanceNorm2d, Module, gan_log_losses, l1_loss
from .optim import Adam

DIRECTIONS = ("young-to-old", "old-to-young")


class ResBlock(Module):
    def __init__(self, ch, dropout, rng):
        super().__init__()
        self.conv1 = Conv2d(ch, ch, 3, padding=1, rng=rng)
        self.norm1 = InstanceNorm2d(ch)
        self.drop = Dropout(dropout, rng)
        self.conv2 = Conv2d(ch, ch, 3, padding=1, rng=rng)
        self.norm2 = InstanceNorm2d(ch)

    def forward(self, x):
        h = ad.relu(self.norm1(self.conv1(x)))
        h = self.drop(h)
        h = self.norm2(self.conv2(h))
        return x + h


class ResnetGenerator(Module):
    """7x7 head, two stride-2 downs, residual trunk, two stride-2 ups, tanh tail."""

    def __init__(self, in_ch=3, out_ch=3, base=32, n_res=4, dropout=0.0, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.head = Conv2d(in_ch, base, 7, padding=3, rng=rng)
        self.norm_head = InstanceNorm2d(base)
        self.down1 = Conv2d(base, base * 2, 3, stride=2, padding=1, rng=rng)
        self.norm_down1 = InstanceNorm2d(base * 2)
        self.down2 = Conv2d(base * 2, base * 4, 3, stride=2, padding=1, rng=rng)
        self.norm_down2 = InstanceNorm2d(base * 4)
        self.blocks = [ResBlock(base * 4, dropout, rng) for _ in range(n_res)]
        self.up1 = ConvTranspose2d(base * 4, base * 2, 4, stride=2, padding=1, rng=rng)
        self.norm_up1 = InstanceNorm2d(base * 2)
        self.up2 = ConvTranspose2d(base * 2, base, 4, stride=2, padding=1, rng=rng)
        self.norm_up2 = InstanceNorm2d(base)
        self.tail = Conv2d(base, out_ch, 7, padding=3, rng=rng)

    def forward(self, x):
        h = ad.relu(self.norm_head(self.head(x)))
        h = ad.relu(self.norm_down1(self.down1(h)))
        h = ad.relu(self.norm_down2(self.down2(h)))
        for block in self.blocks:
            h = block(h)
        h = ad.relu(self.norm_up1(self.up1(h)))
        h = ad.relu(self.norm_up2(self.up2(h)))
        return ad.tanh(self.tail(h))


class PatchDiscriminator(Module):
    """Three stride-2 conv blocks plus a 1x1 sigmoid head; emits a score grid.

    Supports inputs of 16 px and up (score grid stays larger than 1x1).
    """

    def __init__(self, in_ch=3, base=32, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.conv1 = Conv2d(in_ch, base, 4, stride=2, padding=1, rng=rng)
        self.conv2 = Conv2d(base, base * 2, 4, stride=2, padding=1, rng=rng)
        self.norm2 = InstanceNorm2d(base * 2)
        self.conv3 = Conv2d(base * 2, base * 4, 4, stride=2, padding=1, rng=rng)
        self.norm3 = InstanceNorm2d(base * 4)
        self.head = Conv2d(base * 4, 1, 1, rng=rng)

    def forward_features(self, x):
        f1 = ad.leaky_relu(self.conv1(x), 0.2)
        f2 = ad.leaky_relu(self.norm2(self.conv2(f1)), 0.2)
        f3 = ad.leaky_relu(self.norm3(self.conv3(f2)), 0.2)
        score = ad.sigmoid(self.head(f3))
        return score, [f1, f2, f3, score]

    def forward(self, x):
        return self.forward_features(x)[0]


class ImagePool:
    """Bounded replay buffer of generated fakes (uniform replace/sample)."""

    def __init__(self, capacity=50, rng=None):
        self.capacity = capacity
        self.rng = rng or np.random.default_rng(0)
        self.buffer = []

    def query(self, batch: Tensor) -> Tensor:
        if self.capacity == 0:
            return batch.detach()
        out = []
        for img in batch.data:
            if len(self.buffer) < self.capacity:
                self.buffer.append(img.copy())
                out.append(img)
            elif self.rng.random() < 0.5:
                out.append(img)
            else:
                idx = int(self.rng.integers(self.capacity))
                out.append(self.buffer[idx].copy())
                self.buffer[idx] = img.copy()
        return Tensor(np.stack(out))


class CycleGanModels:
    """G: X->Y, F: Y->X plus the two patch discriminators."""

    def __init__(self, cfg, rng=None):
        rng = rng or np.random.default_rng(cfg.seed)
        base_g, base_d = cfg.gen_base_channels, cfg.disc_base_channels
        self.gen_xy = ResnetGenerator(3, 3, base_g, cfg.n_res_blocks, cfg.dropout, rng)
        self.gen_yx = ResnetGenerator(3, 3, base_g, cfg.n_res_blocks, cfg.dropout, rng)
        self.disc_x = PatchDiscriminator(3, base_d, rng)
        self.disc_y = PatchDiscriminator(3, base_d, rng)

    def nets(self):
        return {"gen_xy": self.gen_xy, "gen_yx": self.gen_yx, "disc_x": self.disc_x, "disc_y": self.disc_y}

    def train(self, mode=True):
        for net in self.nets().values():
            net.train(mode)
        return self

    def eval(self):
        return self.train(False)


# -- losses ---------------------------------------------------------------------


def generator_log_loss(scores: Tensor) -> Tensor:
    """Non-saturating generator objective on a discriminator score grid."""
    from .nn import SCORE_EPS

    return -ad.mean(ad.log(ad.clamp(scores, SCORE_EPS, 1.0 - SCORE_EPS)))


def adversarial_loss(disc: PatchDiscriminator, real: Tensor, fake: Tensor):
    """(loss_D, loss_G) for one domain; loss_G backpropagates only into `fake`."""
    if real.data.shape != fake.data.shape:
        raise ContractError(f"adversarial_loss: real {real.data.shape} vs fake {fake.data.shape}")
    loss_d, _ = gan_log_losses(disc(real), disc(fake.detach()))
    loss_g = generator_log_loss(disc(fake))
    return loss_d, loss_g


def cycle_loss(x: Tensor, recon_x: Tensor, y: Tensor, recon_y: Tensor) -> Tensor:
    """Sum of the two mean-L1 reconstruction terms."""
    return l1_loss(recon_x, x) + l1_loss(recon_y, y)


def full_objective(adv_xy, adv_yx, cyc, lambda_cyc):
    """Weighted total: both adversarial terms plus lambda times the cycle term."""
    return adv_xy + adv_yx + lambda_cyc * cyc


# -- training ---------------------------------------------------------------------


def _finite_or_raise(name, value, context):
    if not np.isfinite(value):
        raise NumericError(f"non-finite {name} ({value}) at {context}")
    return value


def make_optimizers(models: CycleGanModels, cfg):
    gen_params = models.gen_xy.parameters() + models.gen_yx.parameters()
    return {
        "gen": Adam(gen_params, lr=cfg.lr_g, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2),
        "disc_x": Adam(models.disc_x.parameters(), lr=cfg.lr_d, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2),
        "disc_y": Adam(models.disc_y.parameters(), lr=cfg.lr_d, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2),
    }


def train_epoch(young: np.ndarray, old: np.ndarray, models: CycleGanModels, optimizers,
                pools, cfg, rng, epoch=0):
    """One pass of alternating updates; returns running-mean losses.

    `young`/`old` are (N, 3, H, W) float32 stacks of colored edge maps.
    Generators step first on the joint objective, then each discriminator
    steps on pooled fakes.
    """
    if len(young) == 0 or len(old) == 0:
        raise ContractError("train_epoch: both domains must be non-empty")
    models.train(True)
    bs = cfg.batch_size
    steps = min(len(young), len(old)) // bs
    if steps == 0:
        raise ContractError(f"batch size {bs} exceeds domain size {min(len(young), len(old))}")
    ix = rng.permutation(len(young))
    iy = rng.permutation(len(old))
    sums = {"loss_G_total": 0.0, "loss_D_X": 0.0, "loss_D_Y": 0.0, "loss_cyc": 0.0}

    for step in range(steps):
        ctx = f"epoch {epoch} step {step}"
        x = Tensor(young[ix[step * bs:(step + 1) * bs]])
        y = Tensor(old[iy[step * bs:(step + 1) * bs]])

        fake_y = models.gen_xy(x)
        rec_x = models.gen_yx(fake_y)
        fake_x = models.gen_yx(y)
        rec_y = models.gen_xy(fake_x)

        loss_g_xy = generator_log_loss(models.disc_y(fake_y))
        loss_g_yx = generator_log_loss(models.disc_x(fake_x))
        loss_cyc = cycle_loss(x, rec_x, y, rec_y)
        total_g = full_objective(loss_g_xy, loss_g_yx, loss_cyc, cfg.lambda_cyc)

        optimizers["gen"].zero_grad()
        ad.backward(total_g)
        optimizers["gen"].step()

        pooled_y = pools["y"].query(fake_y.detach())
        loss_d_y, _ = gan_log_losses(models.disc_y(y), models.disc_y(pooled_y))
        optimizers["disc_y"].zero_grad()
        ad.backward(loss_d_y)
        optimizers["disc_y"].step()

        pooled_x = pools["x"].query(fake_x.detach())
        loss_d_x, _ = gan_log_losses(models.disc_x(x), models.disc_x(pooled_x))
        optimizers["disc_x"].zero_grad()
        ad.backward(loss_d_x)
        optimizers["disc_x"].step()

        sums["loss_G_total"] += _finite_or_raise("loss_G_total", total_g.item(), ctx)
        sums["loss_D_X"] += _finite_or_raise("loss_D_X", loss_d_x.item(), ctx)
        sums["loss_D_Y"] += _finite_or_raise("loss_D_Y", loss_d_y.item(), ctx)
        sums["loss_cyc"] += _finite_or_raise("loss_cyc", loss_cyc.item(), ctx)

    return {key: value / steps for key, value in sums.items()}


def translate(edge: EdgeMap, direction: str, models: CycleGanModels) -> EdgeMap:
    """Run one generator on a colorized edge map; output is binarized,
    re-classified against the face polygon, and whitened."""
    if models is None:
        raise ContractError("translate needs trained models")
    if direction not in DIRECTIONS:
        raise ContractError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if edge.polygon is None:
        raise ContractError("edge map carries no face polygon for re-classification")
    gen = models.gen_xy if direction == "young-to-old" else models.gen_yx
    gen.eval()
    try:
        out = gen(Tensor(edge_to_array(edge)[None])).data[0]
    finally:
        gen.train(True)
    return edge_map_from_soft(out, edge.polygon)
